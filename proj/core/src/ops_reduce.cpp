#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cams/ops.hpp"
#include "op_support.hpp"

namespace cams {

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  auto xv = x.values();
  T acc = T(0);
  for (T v : xv) acc += v;
  Tensor<T> y = Tensor<T>::scalar(acc);
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("sum", {x}, y, [xi, yi]() {
      xi->ensure_grad();
      const T g = yi->grad[0];
      for (auto& v : xi->grad) v += g;
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::vector<int> axes, bool keepdims) {
  const int nd = x.ndim();
  std::vector<bool> reduce(static_cast<std::size_t>(nd), false);
  for (int& a : axes) {
    a = normalize_axis(a, nd, "sum");
    if (reduce[static_cast<std::size_t>(a)]) {
      throw std::invalid_argument("sum: duplicate axis " + std::to_string(a));
    }
    reduce[static_cast<std::size_t>(a)] = true;
  }
  const Shape& s = x.shape();
  Shape out_shape;
  Shape kept_shape;  // with reduced axes as 1, for index mapping
  kept_shape.reserve(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) {
    const auto si = s[static_cast<std::size_t>(i)];
    kept_shape.push_back(reduce[static_cast<std::size_t>(i)] ? 1 : si);
    if (reduce[static_cast<std::size_t>(i)]) {
      if (keepdims) out_shape.push_back(1);
    } else {
      out_shape.push_back(si);
    }
  }
  Shape out_strides = shape_strides(kept_shape);
  std::vector<std::int64_t> map_stride(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd; ++i) {
    map_stride[static_cast<std::size_t>(i)] =
        reduce[static_cast<std::size_t>(i)] ? 0 : out_strides[static_cast<std::size_t>(i)];
  }

  auto xv = x.values();
  std::vector<T> out(static_cast<std::size_t>(shape_numel(kept_shape)), T(0));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
  std::int64_t out_flat = 0;
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(out_flat)] += xv[static_cast<std::size_t>(i)];
    for (std::size_t d = static_cast<std::size_t>(nd); d-- > 0;) {
      idx[d] += 1;
      out_flat += map_stride[d];
      if (idx[d] < s[d]) break;
      out_flat -= map_stride[d] * s[d];
      idx[d] = 0;
    }
  }
  Tensor<T> y(out_shape, std::move(out));
  if (detail::track_grad<T>({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    detail::record_op("sum_axes", {x}, y,
                      [xi, yi, map_stride = std::move(map_stride), s]() {
                        xi->ensure_grad();
                        const std::size_t nd2 = s.size();
                        std::vector<std::int64_t> idx2(nd2, 0);
                        std::int64_t out_flat2 = 0;
                        const std::int64_t n2 = shape_numel(s);
                        for (std::int64_t i = 0; i < n2; ++i) {
                          xi->grad[static_cast<std::size_t>(i)] +=
                              yi->grad[static_cast<std::size_t>(out_flat2)];
                          for (std::size_t d = nd2; d-- > 0;) {
                            idx2[d] += 1;
                            out_flat2 += map_stride[d];
                            if (idx2[d] < s[d]) break;
                            out_flat2 -= map_stride[d] * s[d];
                            idx2[d] = 0;
                          }
                        }
                      });
  }
  return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.numel()));
}

#define CAMS_INSTANTIATE(T)                                              \
  template Tensor<T> sum<T>(const Tensor<T>&);                           \
  template Tensor<T> sum<T>(const Tensor<T>&, std::vector<int>, bool);   \
  template Tensor<T> mean<T>(const Tensor<T>&);

CAMS_INSTANTIATE(float)
CAMS_INSTANTIATE(double)
#undef CAMS_INSTANTIATE

}  // namespace cams
