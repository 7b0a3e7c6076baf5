#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cams/ops.hpp"
#include "op_support.hpp"

namespace cams {

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x) {
  if (x.ndim() != 4) {
    throw std::invalid_argument("avg_pool2d: expected [B, C, H, W], got " +
                                shape_str(x.shape()));
  }
  const std::int64_t b = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("avg_pool2d: spatial dims must be even, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  const std::int64_t ho = h / 2, wo = w / 2;
  auto xv = x.values();
  std::vector<T> out(static_cast<std::size_t>(b * c * ho * wo));
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const T* src = xv.data() + bc * h * w;
    T* dst = out.data() + bc * ho * wo;
    for (std::int64_t i = 0; i < ho; ++i) {
      for (std::int64_t j = 0; j < wo; ++j) {
        const T* p = src + 2 * i * w + 2 * j;
        dst[i * wo + j] = (p[0] + p[1] + p[w] + p[w + 1]) * T(0.25);
      }
    }
  }
  Tensor<T> y(Shape{b, c, ho, wo}, std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("avg_pool2d", {x}, y, [xi, yi, b, c, h, w, ho, wo]() {
      xi->ensure_grad();
      for (std::int64_t bc = 0; bc < b * c; ++bc) {
        const T* g = yi->grad.data() + bc * ho * wo;
        T* dst = xi->grad.data() + bc * h * w;
        for (std::int64_t i = 0; i < ho; ++i) {
          for (std::int64_t j = 0; j < wo; ++j) {
            const T q = g[i * wo + j] * T(0.25);
            T* p = dst + 2 * i * w + 2 * j;
            p[0] += q;
            p[1] += q;
            p[w] += q;
            p[w + 1] += q;
          }
        }
      }
    });
  }
  return y;
}

namespace {

// Edge-clamped source taps for doubling one axis with align_corners = false:
// output i samples source (i + 0.5) / 2 - 0.5.
struct Tap {
  std::int64_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> upsample_taps(std::int64_t n) {
  std::vector<Tap> taps(static_cast<std::size_t>(2 * n));
  for (std::int64_t o = 0; o < 2 * n; ++o) {
    const double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    const double f = std::floor(src);
    const double w1 = src - f;
    const std::int64_t i0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(f), 0, n - 1);
    const std::int64_t i1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(f) + 1, 0, n - 1);
    taps[static_cast<std::size_t>(o)] = Tap{i0, i1, w1};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample2d(const Tensor<T>& x) {
  if (x.ndim() != 4) {
    throw std::invalid_argument("bilinear_upsample2d: expected [B, C, H, W], got " +
                                shape_str(x.shape()));
  }
  const std::int64_t b = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  if (h < 1 || w < 1) {
    throw std::invalid_argument("bilinear_upsample2d: empty spatial dims " + shape_str(x.shape()));
  }
  const std::int64_t ho = 2 * h, wo = 2 * w;
  const auto ty = upsample_taps(h);
  const auto tx = upsample_taps(w);
  auto xv = x.values();
  std::vector<T> out(static_cast<std::size_t>(b * c * ho * wo));
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const T* src = xv.data() + bc * h * w;
    T* dst = out.data() + bc * ho * wo;
    for (std::int64_t i = 0; i < ho; ++i) {
      const Tap& y_ = ty[static_cast<std::size_t>(i)];
      const T wy1 = static_cast<T>(y_.w1);
      const T wy0 = T(1) - wy1;
      const T* r0 = src + y_.i0 * w;
      const T* r1 = src + y_.i1 * w;
      for (std::int64_t j = 0; j < wo; ++j) {
        const Tap& x_ = tx[static_cast<std::size_t>(j)];
        const T wx1 = static_cast<T>(x_.w1);
        const T wx0 = T(1) - wx1;
        dst[i * wo + j] = wy0 * (wx0 * r0[x_.i0] + wx1 * r0[x_.i1]) +
                          wy1 * (wx0 * r1[x_.i0] + wx1 * r1[x_.i1]);
      }
    }
  }
  Tensor<T> y(Shape{b, c, ho, wo}, std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("bilinear_upsample2d", {x}, y, [xi, yi, b, c, h, w, ho, wo, ty, tx]() {
      xi->ensure_grad();
      for (std::int64_t bc = 0; bc < b * c; ++bc) {
        const T* g = yi->grad.data() + bc * ho * wo;
        T* dst = xi->grad.data() + bc * h * w;
        for (std::int64_t i = 0; i < ho; ++i) {
          const Tap& y_ = ty[static_cast<std::size_t>(i)];
          const T wy1 = static_cast<T>(y_.w1);
          const T wy0 = T(1) - wy1;
          for (std::int64_t j = 0; j < wo; ++j) {
            const Tap& x_ = tx[static_cast<std::size_t>(j)];
            const T wx1 = static_cast<T>(x_.w1);
            const T wx0 = T(1) - wx1;
            const T gv = g[i * wo + j];
            dst[y_.i0 * w + x_.i0] += wy0 * wx0 * gv;
            dst[y_.i0 * w + x_.i1] += wy0 * wx1 * gv;
            dst[y_.i1 * w + x_.i0] += wy1 * wx0 * gv;
            dst[y_.i1 * w + x_.i1] += wy1 * wx1 * gv;
          }
        }
      }
    });
  }
  return y;
}

#define CAMS_INSTANTIATE(T)                              \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&);    \
  template Tensor<T> bilinear_upsample2d<T>(const Tensor<T>&);

CAMS_INSTANTIATE(float)
CAMS_INSTANTIATE(double)
#undef CAMS_INSTANTIATE

}  // namespace cams
