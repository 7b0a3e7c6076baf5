#pragma once

// Internal helpers shared by the op kernels. Not installed.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cams/tensor.hpp"

namespace cams::detail {

template <typename T>
bool track_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (!Tape<T>::active()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record_op(const char* op, std::initializer_list<Tensor<T>> inputs, Tensor<T>& out,
               std::function<void()> backward) {
  std::vector<std::shared_ptr<TensorImpl<T>>> impls;
  impls.reserve(inputs.size());
  for (const Tensor<T>& t : inputs) impls.push_back(t.impl());
  Tape<T>::active()->record(op, std::move(impls), out.impl(), std::move(backward));
}

// Mapping of a broadcast operand b onto the element space of a. The stride of
// every broadcast axis is zero, so b_flat = sum(idx[d] * stride[d]).
struct BroadcastPlan {
  bool same = false;           // identical shapes
  bool suffix = false;         // b is a contiguous trailing block of a
  std::int64_t outer = 1;
  std::int64_t inner = 1;      // == b.numel() when suffix
  Shape a_shape;
  std::vector<std::int64_t> b_stride;  // per a-axis, 0 where broadcast
};

inline BroadcastPlan make_broadcast_plan(const Shape& a, const Shape& b, const char* op) {
  if (b.size() > a.size()) {
    throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_str(b) +
                                " over " + shape_str(a));
  }
  BroadcastPlan plan;
  plan.a_shape = a;
  plan.b_stride.assign(a.size(), 0);
  const std::size_t off = a.size() - b.size();
  Shape b_strides = shape_strides(b);
  bool any_one = false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] == a[off + i]) {
      plan.b_stride[off + i] = b_strides[i];
      if (b[i] == 1) continue;
    } else if (b[i] == 1) {
      any_one = true;
    } else {
      throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_str(b) +
                                  " over " + shape_str(a));
    }
  }
  if (a == b) {
    plan.same = true;
    return plan;
  }
  if (!any_one) {
    // b matches the trailing axes exactly: one contiguous inner block.
    plan.suffix = true;
    plan.inner = shape_numel(b);
    plan.outer = plan.inner == 0 ? 0 : shape_numel(a) / plan.inner;
  }
  return plan;
}

// Calls fn(a_flat, b_flat) for every element of a.
template <typename F>
void broadcast_for_each(const BroadcastPlan& plan, F&& fn) {
  const std::int64_t n = shape_numel(plan.a_shape);
  if (plan.same) {
    for (std::int64_t i = 0; i < n; ++i) fn(i, i);
    return;
  }
  if (plan.suffix) {
    std::int64_t flat = 0;
    for (std::int64_t o = 0; o < plan.outer; ++o) {
      for (std::int64_t i = 0; i < plan.inner; ++i, ++flat) fn(flat, i);
    }
    return;
  }
  const std::size_t nd = plan.a_shape.size();
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t b_flat = 0;
  for (std::int64_t a_flat = 0; a_flat < n; ++a_flat) {
    fn(a_flat, b_flat);
    for (std::size_t d = nd; d-- > 0;) {
      idx[d] += 1;
      b_flat += plan.b_stride[d];
      if (idx[d] < plan.a_shape[d]) break;
      b_flat -= plan.b_stride[d] * plan.a_shape[d];
      idx[d] = 0;
    }
  }
}

}  // namespace cams::detail
