#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cams/ops.hpp"
#include "op_support.hpp"

namespace cams {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() < 2 || b.ndim() != 2) {
    throw std::invalid_argument("matmul: expected a [..., m, k] x b [k, n], got " +
                                shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Shape& as = a.shape();
  const std::int64_t m = as[as.size() - 2];
  const std::int64_t k = as[as.size() - 1];
  const std::int64_t kb = b.shape()[0];
  const std::int64_t n = b.shape()[1];
  if (k != kb) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(as) + " x " +
                                shape_str(b.shape()));
  }
  const std::int64_t batch = a.numel() / (m * k);

  Shape out_shape = as;
  out_shape.back() = n;
  std::vector<T> out(static_cast<std::size_t>(batch * m * n), T(0));
  const T* ap = a.values().data();
  const T* bp = b.values().data();
  for (std::int64_t bi = 0; bi < batch; ++bi) {
    const T* A = ap + bi * m * k;
    T* O = out.data() + bi * m * n;
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const T av = A[i * k + kk];
        if (av == T(0)) continue;
        const T* brow = bp + kk * n;
        T* orow = O + i * n;
        for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
  Tensor<T> y(std::move(out_shape), std::move(out));
  if (detail::track_grad<T>({&a, &b})) {
    auto ai = a.impl();
    auto bi_ = b.impl();
    auto yi = y.impl();
    detail::record_op("matmul", {a, b}, y, [ai, bi_, yi, batch, m, k, n]() {
      const bool need_a = ai->requires_grad;
      const bool need_b = bi_->requires_grad;
      if (need_a) ai->ensure_grad();
      if (need_b) bi_->ensure_grad();
      const T* bp = bi_->data.data();
      for (std::int64_t bb = 0; bb < batch; ++bb) {
        const T* A = ai->data.data() + bb * m * k;
        const T* G = yi->grad.data() + bb * m * n;
        if (need_a) {
          T* GA = ai->grad.data() + bb * m * k;
          for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t kk = 0; kk < k; ++kk) {
              const T* grow = G + i * n;
              const T* brow = bp + kk * n;
              T acc = T(0);
              for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              GA[i * k + kk] += acc;
            }
          }
        }
        if (need_b) {
          T* GB = bi_->grad.data();
          for (std::int64_t i = 0; i < m; ++i) {
            const T* grow = G + i * n;
            for (std::int64_t kk = 0; kk < k; ++kk) {
              const T av = A[i * k + kk];
              if (av == T(0)) continue;
              T* gbrow = GB + kk * n;
              for (std::int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w) {
  if (w.ndim() != 2) {
    throw std::invalid_argument("linear: weight must be 2-d, got " + shape_str(w.shape()));
  }
  if (x.ndim() == 0 || x.shape().back() != w.shape()[0]) {
    throw std::invalid_argument("linear: input features " +
                                (x.ndim() ? std::to_string(x.shape().back()) : "none") +
                                " do not match weight rows (x " + shape_str(x.shape()) +
                                ", w " + shape_str(w.shape()) + ")");
  }
  if (x.ndim() == 2) return matmul(x, w);
  const std::int64_t d_in = w.shape()[0];
  const std::int64_t d_out = w.shape()[1];
  Shape lead(x.shape().begin(), x.shape().end() - 1);
  Tensor<T> flat = reshape(x, Shape{x.numel() / d_in, d_in});
  Tensor<T> y = matmul(flat, w);
  Shape out_shape = lead;
  out_shape.push_back(d_out);
  return reshape(y, std::move(out_shape));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (bias.ndim() != 1 || bias.shape()[0] != w.shape()[1]) {
    throw std::invalid_argument("linear: bias " + shape_str(bias.shape()) +
                                " does not match weight columns (w " + shape_str(w.shape()) +
                                ")");
  }
  return add(linear(x, w), bias);
}

#define CAMS_INSTANTIATE(T)                                                    \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

CAMS_INSTANTIATE(float)
CAMS_INSTANTIATE(double)
#undef CAMS_INSTANTIATE

}  // namespace cams
