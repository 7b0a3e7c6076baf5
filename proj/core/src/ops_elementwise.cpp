#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "cams/ops.hpp"
#include "op_support.hpp"

namespace cams {

namespace {

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Shared skeleton for the four broadcasting binary ops. `fwd(av, bv)` computes
// the output; `bwd(g, av, bv, out) -> {da, db}` the local partials.
template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, Bwd bwd) {
  auto plan = detail::make_broadcast_plan(a.shape(), b.shape(), name);
  auto av = a.values();
  auto bv = b.values();
  std::vector<T> out(av.size());
  detail::broadcast_for_each(plan, [&](std::int64_t ia, std::int64_t ib) {
    out[static_cast<std::size_t>(ia)] = fwd(av[static_cast<std::size_t>(ia)],
                                            bv[static_cast<std::size_t>(ib)]);
  });
  Tensor<T> y(a.shape(), std::move(out));
  if (detail::track_grad<T>({&a, &b})) {
    auto ai = a.impl();
    auto bi = b.impl();
    auto yi = y.impl();
    detail::record_op(name, {a, b}, y, [ai, bi, yi, plan = std::move(plan), bwd]() {
      const bool need_a = ai->requires_grad;
      const bool need_b = bi->requires_grad;
      if (need_a) ai->ensure_grad();
      if (need_b) bi->ensure_grad();
      detail::broadcast_for_each(plan, [&](std::int64_t ia, std::int64_t ib) {
        const auto sa = static_cast<std::size_t>(ia);
        const auto sb = static_cast<std::size_t>(ib);
        const T g = yi->grad[sa];
        auto [da, db] = bwd(g, ai->data[sa], bi->data[sb], yi->data[sa]);
        if (need_a) ai->grad[sa] += da;
        if (need_b) bi->grad[sb] += db;
      });
    });
  }
  return y;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, Fwd fwd, Bwd bwd) {
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor<T> y(x.shape(), std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op(name, {x}, y, [xi, yi, bwd]() {
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->grad.size(); ++i) {
        xi->grad[i] += yi->grad[i] * bwd(xi->data[i], yi->data[i]);
      }
    });
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T g, T, T, T) { return std::pair<T, T>(g, g); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T g, T, T, T) { return std::pair<T, T>(g, -g); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T g, T x, T y, T) { return std::pair<T, T>(g * y, g * x); });
}

template <typename T>
Tensor<T> divide(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op<T>(
      "divide", a, b, [](T x, T y) { return x / y; },
      [](T g, T, T y, T out) { return std::pair<T, T>(g / y, -g * out / y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary_op<T>(
      "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return unary_op<T>(
      "mul_scalar", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary_op<T>(
      "neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  return unary_op<T>(
      "silu", x, [](T v) { return v * sigmoid_scalar(v); },
      [](T v, T) {
        const T s = sigmoid_scalar(v);
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op<T>(
      "sigmoid", x, [](T v) { return sigmoid_scalar(v); },
      [](T, T out) { return out * (T(1) - out); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary_op<T>(
      "softplus", x,
      [](T v) { return v > T(20) ? v : static_cast<T>(std::log1p(std::exp(v))); },
      [](T v, T) { return sigmoid_scalar(v); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op<T>(
      "exp", x, [](T v) { return static_cast<T>(std::exp(v)); },
      [](T, T out) { return out; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int a = normalize_axis(axis, x.ndim(), "softmax");
  const Shape& s = x.shape();
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (int i = a + 1; i < x.ndim(); ++i) inner *= s[static_cast<std::size_t>(i)];
  const std::int64_t n = s[static_cast<std::size_t>(a)];

  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      T mx = xv[static_cast<std::size_t>(base)];
      for (std::int64_t k = 1; k < n; ++k) {
        mx = std::max(mx, xv[static_cast<std::size_t>(base + k * inner)]);
      }
      T denom = T(0);
      for (std::int64_t k = 0; k < n; ++k) {
        const T e = std::exp(xv[static_cast<std::size_t>(base + k * inner)] - mx);
        out[static_cast<std::size_t>(base + k * inner)] = e;
        denom += e;
      }
      for (std::int64_t k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(base + k * inner)] /= denom;
      }
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("softmax", {x}, y, [xi, yi, outer, inner, n]() {
      xi->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
          const std::int64_t base = o * n * inner + in;
          T dot = T(0);
          for (std::int64_t k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(base + k * inner);
            dot += yi->grad[i] * yi->data[i];
          }
          for (std::int64_t k = 0; k < n; ++k) {
            const auto i = static_cast<std::size_t>(base + k * inner);
            xi->grad[i] += yi->data[i] * (yi->grad[i] - dot);
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, double eps) {
  if (x.ndim() < 1) throw std::invalid_argument("rms_norm: needs at least one axis");
  if (eps <= 0.0) throw std::invalid_argument("rms_norm: eps must be positive");
  const std::int64_t n = x.dim(x.ndim() - 1);
  const std::int64_t rows = x.numel() / n;
  const T e = static_cast<T>(eps);

  auto xv = x.values();
  std::vector<T> out(xv.size());
  std::vector<T> inv_rms(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t base = r * n;
    T m = T(0);
    for (std::int64_t k = 0; k < n; ++k) {
      const T v = xv[static_cast<std::size_t>(base + k)];
      m += v * v;
    }
    const T s = T(1) / std::sqrt(m / static_cast<T>(n) + e);
    inv_rms[static_cast<std::size_t>(r)] = s;
    for (std::int64_t k = 0; k < n; ++k) {
      out[static_cast<std::size_t>(base + k)] = xv[static_cast<std::size_t>(base + k)] * s;
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("rms_norm", {x}, y, [xi, yi, inv_rms = std::move(inv_rms), rows, n]() {
      xi->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t base = r * n;
        const T s = inv_rms[static_cast<std::size_t>(r)];
        T dot = T(0);
        for (std::int64_t k = 0; k < n; ++k) {
          const auto i = static_cast<std::size_t>(base + k);
          dot += yi->grad[i] * xi->data[i];
        }
        const T c = s * s * s * dot / static_cast<T>(n);
        for (std::int64_t k = 0; k < n; ++k) {
          const auto i = static_cast<std::size_t>(base + k);
          xi->grad[i] += s * yi->grad[i] - c * xi->data[i];
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, RngStream& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: probability " + std::to_string(p) +
                                " outside [0, 1)");
  }
  if (!training || p == 0.0) return x;
  auto xv = x.values();
  std::vector<std::uint8_t> mask(xv.size());
  std::vector<T> out(xv.size());
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() >= p ? 1 : 0;
    out[i] = mask[i] ? xv[i] * scale : T(0);
  }
  Tensor<T> y(x.shape(), std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("dropout", {x}, y, [xi, yi, mask = std::move(mask), scale]() {
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->grad.size(); ++i) {
        if (mask[i]) xi->grad[i] += yi->grad[i] * scale;
      }
    });
  }
  return y;
}

#define CAMS_INSTANTIATE(T)                                                   \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> divide<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                      \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, T);                      \
  template Tensor<T> neg<T>(const Tensor<T>&);                                \
  template Tensor<T> silu<T>(const Tensor<T>&);                               \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                            \
  template Tensor<T> softplus<T>(const Tensor<T>&);                           \
  template Tensor<T> exp<T>(const Tensor<T>&);                                \
  template Tensor<T> softmax<T>(const Tensor<T>&, int);                       \
  template Tensor<T> rms_norm<T>(const Tensor<T>&, double);                   \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, bool, RngStream&);

CAMS_INSTANTIATE(float)
CAMS_INSTANTIATE(double)
#undef CAMS_INSTANTIATE

}  // namespace cams
