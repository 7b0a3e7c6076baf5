#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cams/ops.hpp"
#include "op_support.hpp"

namespace cams {

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " (" +
                                std::to_string(x.numel()) + " elements) as " +
                                shape_str(shape) + " (" + std::to_string(shape_numel(shape)) +
                                " elements)");
  }
  auto xv = x.values();
  Tensor<T> y(std::move(shape), std::vector<T>(xv.begin(), xv.end()));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("reshape", {x}, y, [xi, yi]() {
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += yi->grad[i];
    });
  }
  return y;
}

namespace {

// Gathers out[i] = src[perm_index(i)] given the axis permutation; used for
// both the forward pass and (with the inverse permutation) the backward pass.
template <typename T>
std::vector<T> permute_gather(const T* src, const Shape& in_shape, const std::vector<int>& axes) {
  const std::size_t nd = in_shape.size();
  Shape out_shape(nd);
  for (std::size_t i = 0; i < nd; ++i) out_shape[i] = in_shape[static_cast<std::size_t>(axes[i])];
  Shape in_strides = shape_strides(in_shape);
  std::vector<std::int64_t> gather_stride(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    gather_stride[i] = in_strides[static_cast<std::size_t>(axes[i])];
  }
  const std::int64_t n = shape_numel(in_shape);
  std::vector<T> out(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t src_flat = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = src[src_flat];
    for (std::size_t d = nd; d-- > 0;) {
      idx[d] += 1;
      src_flat += gather_stride[d];
      if (idx[d] < out_shape[d]) break;
      src_flat -= gather_stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::vector<int> axes) {
  const std::size_t nd = static_cast<std::size_t>(x.ndim());
  if (axes.size() != nd) {
    throw std::invalid_argument("permute: " + std::to_string(axes.size()) + " axes for rank " +
                                std::to_string(nd));
  }
  std::vector<bool> seen(nd, false);
  for (int& a : axes) {
    a = normalize_axis(a, static_cast<int>(nd), "permute");
    if (seen[static_cast<std::size_t>(a)]) {
      throw std::invalid_argument("permute: duplicate axis " + std::to_string(a));
    }
    seen[static_cast<std::size_t>(a)] = true;
  }
  Shape out_shape(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    out_shape[i] = x.shape()[static_cast<std::size_t>(axes[i])];
  }
  Tensor<T> y(out_shape, permute_gather(x.values().data(), x.shape(), axes));
  if (detail::track_grad<T>({&x})) {
    std::vector<int> inverse(nd);
    for (std::size_t i = 0; i < nd; ++i) inverse[static_cast<std::size_t>(axes[i])] = static_cast<int>(i);
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("permute", {x}, y,
                      [xi, yi, inverse = std::move(inverse), out_shape = std::move(out_shape)]() {
                        xi->ensure_grad();
                        auto g = permute_gather(yi->grad.data(), out_shape, inverse);
                        for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
                      });
  }
  return y;
}

template <typename T>
Tensor<T> flip(const Tensor<T>& x, int axis) {
  const int a = normalize_axis(axis, x.ndim(), "flip");
  const Shape& s = x.shape();
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (int i = a + 1; i < x.ndim(); ++i) inner *= s[static_cast<std::size_t>(i)];
  const std::int64_t n = s[static_cast<std::size_t>(a)];

  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t k = 0; k < n; ++k) {
      const T* src = xv.data() + (o * n + k) * inner;
      T* dst = out.data() + (o * n + (n - 1 - k)) * inner;
      std::copy(src, src + inner, dst);
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("flip", {x}, y, [xi, yi, outer, inner, n]() {
      xi->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t k = 0; k < n; ++k) {
          const T* g = yi->grad.data() + (o * n + (n - 1 - k)) * inner;
          T* dst = xi->grad.data() + (o * n + k) * inner;
          for (std::int64_t i = 0; i < inner; ++i) dst[i] += g[i];
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
  const int a = normalize_axis(axis, x.ndim(), "narrow");
  const Shape& s = x.shape();
  const std::int64_t n = s[static_cast<std::size_t>(a)];
  if (start < 0 || length < 0 || start + length > n) {
    throw std::invalid_argument("narrow: window [" + std::to_string(start) + ", " +
                                std::to_string(start + length) + ") out of range for axis of size " +
                                std::to_string(n));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (int i = a + 1; i < x.ndim(); ++i) inner *= s[static_cast<std::size_t>(i)];

  Shape out_shape = s;
  out_shape[static_cast<std::size_t>(a)] = length;
  auto xv = x.values();
  std::vector<T> out(static_cast<std::size_t>(outer * length * inner));
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* src = xv.data() + (o * n + start) * inner;
    T* dst = out.data() + o * length * inner;
    std::copy(src, src + length * inner, dst);
  }
  Tensor<T> y(std::move(out_shape), std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("narrow", {x}, y, [xi, yi, outer, inner, n, start, length]() {
      xi->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        const T* g = yi->grad.data() + o * length * inner;
        T* dst = xi->grad.data() + (o * n + start) * inner;
        for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += g[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> one_hot(const Tensor<std::uint8_t>& labels, std::int64_t num_classes) {
  if (labels.ndim() != 3) {
    throw std::invalid_argument("one_hot: labels must be [B, H, W], got " +
                                shape_str(labels.shape()));
  }
  const std::int64_t b = labels.shape()[0];
  const std::int64_t h = labels.shape()[1];
  const std::int64_t w = labels.shape()[2];
  const std::int64_t hw = h * w;
  auto lv = labels.values();
  std::vector<T> out(static_cast<std::size_t>(b * num_classes * hw), T(0));
  for (std::int64_t i = 0; i < b * hw; ++i) {
    const std::int64_t cls = lv[static_cast<std::size_t>(i)];
    if (cls >= num_classes) {
      throw std::invalid_argument("one_hot: label value " + std::to_string(cls) +
                                  " out of range for " + std::to_string(num_classes) +
                                  " classes");
    }
    const std::int64_t bi = i / hw;
    const std::int64_t pi = i % hw;
    out[static_cast<std::size_t>((bi * num_classes + cls) * hw + pi)] = T(1);
  }
  return Tensor<T>(Shape{b, num_classes, h, w}, std::move(out));
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  auto xv = x.values();
  std::vector<To> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(xv[i]);
  return Tensor<To>(x.shape(), std::move(out));
}

template <typename T>
Tensor<T> random_uniform(Shape shape, RngStream& rng, T lo, T hi) {
  const std::int64_t n = shape_numel(shape);
  std::vector<T> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
  return Tensor<T>(std::move(shape), std::move(out));
}

template <typename T>
Tensor<T> random_normal(Shape shape, RngStream& rng, T mean, T stddev) {
  const std::int64_t n = shape_numel(shape);
  std::vector<T> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = static_cast<T>(rng.normal(static_cast<double>(mean), static_cast<double>(stddev)));
  return Tensor<T>(std::move(shape), std::move(out));
}

#define CAMS_INSTANTIATE(T)                                                              \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                \
  template Tensor<T> permute<T>(const Tensor<T>&, std::vector<int>);                     \
  template Tensor<T> flip<T>(const Tensor<T>&, int);                                     \
  template Tensor<T> narrow<T>(const Tensor<T>&, int, std::int64_t, std::int64_t);       \
  template Tensor<T> one_hot<T>(const Tensor<std::uint8_t>&, std::int64_t);              \
  template Tensor<T> random_uniform<T>(Shape, RngStream&, T, T);                         \
  template Tensor<T> random_normal<T>(Shape, RngStream&, T, T);

CAMS_INSTANTIATE(float)
CAMS_INSTANTIATE(double)
#undef CAMS_INSTANTIATE

template Tensor<std::uint8_t> reshape<std::uint8_t>(const Tensor<std::uint8_t>&, Shape);
template Tensor<std::uint8_t> permute<std::uint8_t>(const Tensor<std::uint8_t>&,
                                                    std::vector<int>);
template Tensor<std::uint8_t> flip<std::uint8_t>(const Tensor<std::uint8_t>&, int);
template Tensor<std::uint8_t> narrow<std::uint8_t>(const Tensor<std::uint8_t>&, int,
                                                   std::int64_t, std::int64_t);

template Tensor<float> cast<float, double>(const Tensor<double>&);
template Tensor<double> cast<double, float>(const Tensor<float>&);
template Tensor<float> cast<float, std::uint8_t>(const Tensor<std::uint8_t>&);
template Tensor<double> cast<double, std::uint8_t>(const Tensor<std::uint8_t>&);
template Tensor<std::uint8_t> cast<std::uint8_t, float>(const Tensor<float>&);

}  // namespace cams
