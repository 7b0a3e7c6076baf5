#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "cams/dtype.hpp"
#include "cams/shape.hpp"

namespace cams {

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;   // empty until backward touches this tensor
  bool requires_grad = false;
  std::int64_t node = -1;  // index on the active tape, -1 when off-tape

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T{});
  }
};

}  // namespace detail

// Dense row-major n-dimensional array. Copying a Tensor is shallow: both
// copies alias the same storage and gradient slot. Use clone() for a deep,
// detached copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  std::int64_t dim(int axis) const;  // negative axes allowed
  std::int64_t numel() const;
  Dtype dtype() const { return dtype_of<T>; }

  std::span<T> values();
  std::span<const T> values() const;
  T item() const;  // requires numel() == 1
  T& at(std::initializer_list<std::int64_t> idx);
  const T& at(std::initializer_list<std::int64_t> idx) const;

  // Deep copy of the data; never carries grad state or tape linkage.
  Tensor clone() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);
  bool has_grad() const;
  std::span<const T> grad() const;  // throws when absent
  std::span<T> grad_mut();
  Tensor grad_tensor() const;
  void zero_grad();

  std::shared_ptr<detail::TensorImpl<T>> impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl<T>> impl);

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Reverse-mode tape. Constructing a Tape makes it the active recorder for
// scalar type T on this thread (at most one may be active); destroying it
// stops recording and unlinks its nodes. Ops executed while a tape is active
// append nodes in creation order, which is also a valid topological order.
// Saved inputs must not be mutated between forward and backward.
template <typename T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::int64_t record(const char* op,
                      std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs,
                      std::shared_ptr<detail::TensorImpl<T>> output,
                      std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps nodes in reverse creation order,
  // visiting each reachable node exactly once and accumulating into the
  // grad slot of every tensor that requires grad. Unreachable tensors are
  // left untouched.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  std::size_t last_visited() const { return visited_; }

 private:
  struct Node {
    const char* op;
    std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs;
    std::shared_ptr<detail::TensorImpl<T>> output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  std::size_t visited_ = 0;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tensor<std::uint8_t>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class Tape<std::uint8_t>;

}  // namespace cams
