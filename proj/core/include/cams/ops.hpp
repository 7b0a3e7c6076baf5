#pragma once

#include <cstdint>
#include <vector>

#include "cams/rng.hpp"
#include "cams/tensor.hpp"

namespace cams {

// Elementwise binary ops. The right operand must broadcast over the trailing
// axes of the left one (right-aligned; each trailing dim equal or 1).
// Gradients of the broadcast operand sum over the broadcast axes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> neg(const Tensor<T>& a);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}

// Activations.
template <typename T>
Tensor<T> silu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
// ln(1 + e^x), switching to the identity tail above x = 20.
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);

// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);

// Parameter-free RMS normalization over the last axis: x / sqrt(mean(x^2) + eps).
template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, double eps = 1e-6);

// a: [..., m, k] (leading axes are batch), b: [k, n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x: [..., d_in], w: [d_in, d_out], optional bias [d_out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w);
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

// Data movement. All of these materialize a fresh row-major buffer.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::vector<int> axes);
template <typename T>
Tensor<T> flip(const Tensor<T>& x, int axis);
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length);

// Reductions.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);  // scalar
template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::vector<int> axes, bool keepdims = false);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);  // scalar

// 2x2 average pooling over the trailing two axes of [B, C, H, W];
// H and W must be even.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x);

// x2 bilinear upsampling of [B, C, H, W], align_corners = false:
// output pixel i samples source coordinate (i + 0.5) / 2 - 0.5, edge-clamped.
template <typename T>
Tensor<T> bilinear_upsample2d(const Tensor<T>& x);

// Inverted dropout: zeroes with probability p and scales survivors by
// 1 / (1 - p). Identity when training is false or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, RngStream& rng);

// labels: [B, H, W] integer classes -> constant [B, K, H, W] indicator.
template <typename T>
Tensor<T> one_hot(const Tensor<std::uint8_t>& labels, std::int64_t num_classes);

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x);

template <typename T>
Tensor<T> random_uniform(Shape shape, RngStream& rng, T lo = T(-1), T hi = T(1));
template <typename T>
Tensor<T> random_normal(Shape shape, RngStream& rng, T mean = T(0), T stddev = T(1));

}  // namespace cams
