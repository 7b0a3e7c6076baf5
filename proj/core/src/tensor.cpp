#include "cams/tensor.hpp"

#include <stdexcept>
#include <utility>

namespace cams {

namespace {

template <typename T>
std::shared_ptr<detail::TensorImpl<T>> make_impl(Shape shape, std::vector<T> data) {
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  const std::int64_t n = shape_numel(shape);
  if (n < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_str(shape));
  if (static_cast<std::int64_t>(data.size()) != n) {
    throw std::invalid_argument("tensor: " + std::to_string(data.size()) +
                                " values provided for shape " + shape_str(shape) + " (" +
                                std::to_string(n) + " expected)");
  }
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape) {
  const std::int64_t n = shape_numel(shape);
  if (n < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_str(shape));
  impl_ = make_impl<T>(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T{}));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data)
    : impl_(make_impl<T>(std::move(shape), std::move(data))) {}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return Tensor(std::move(shape));
}

template <typename T>
Tensor<T> Tensor<T>::ones(Shape shape) {
  return full(std::move(shape), T(1));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  const std::int64_t n = shape_numel(shape);
  if (n < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_str(shape));
  return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(Shape{}, std::vector<T>{value});
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!impl_) throw std::logic_error("tensor: undefined");
  return impl_->shape;
}

template <typename T>
int Tensor<T>::ndim() const {
  return static_cast<int>(shape().size());
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  const int a = normalize_axis(axis, ndim(), "dim");
  return shape()[static_cast<std::size_t>(a)];
}

template <typename T>
std::int64_t Tensor<T>::numel() const {
  return shape_numel(shape());
}

template <typename T>
std::span<T> Tensor<T>::values() {
  if (!impl_) throw std::logic_error("tensor: undefined");
  return impl_->data;
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  if (!impl_) throw std::logic_error("tensor: undefined");
  return impl_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item: tensor of shape " + shape_str(shape()) +
                                " is not a scalar");
  }
  return impl_->data[0];
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::int64_t> idx) {
  return const_cast<T&>(std::as_const(*this).at(idx));
}

template <typename T>
const T& Tensor<T>::at(std::initializer_list<std::int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) {
    throw std::invalid_argument("at: " + std::to_string(idx.size()) + " indices for shape " +
                                shape_str(s));
  }
  std::int64_t flat = 0;
  std::size_t d = 0;
  for (std::int64_t i : idx) {
    if (i < 0 || i >= s[d]) {
      throw std::out_of_range("at: index " + std::to_string(i) + " out of range for axis " +
                              std::to_string(d) + " of " + shape_str(s));
    }
    flat = flat * s[d] + i;
    ++d;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  if (!impl_) return Tensor();
  return Tensor(impl_->shape, impl_->data);
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool v) {
  if (!impl_) throw std::logic_error("tensor: undefined");
  impl_->requires_grad = v;
  return *this;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw std::logic_error("grad: tensor has no gradient");
  return impl_->grad;
}

template <typename T>
std::span<T> Tensor<T>::grad_mut() {
  if (!impl_) throw std::logic_error("tensor: undefined");
  impl_->ensure_grad();
  return impl_->grad;
}

template <typename T>
Tensor<T> Tensor<T>::grad_tensor() const {
  return Tensor(shape(), std::vector<T>(grad().begin(), grad().end()));
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (impl_) impl_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::wrap(std::shared_ptr<detail::TensorImpl<T>> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

// ---- Tape ----

namespace {
template <typename T>
Tape<T>*& active_tape() {
  static thread_local Tape<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename T>
Tape<T>::Tape() {
  if (active_tape<T>() != nullptr) {
    throw std::logic_error("tape: another tape is already active on this thread");
  }
  active_tape<T>() = this;
}

template <typename T>
Tape<T>::~Tape() {
  for (Node& n : nodes_) n.output->node = -1;
  active_tape<T>() = nullptr;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_tape<T>();
}

template <typename T>
std::int64_t Tape<T>::record(const char* op,
                             std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs,
                             std::shared_ptr<detail::TensorImpl<T>> output,
                             std::function<void()> backward) {
  // Only differentiable inputs belong on the tape.
  std::erase_if(inputs, [](const auto& i) { return !i->requires_grad; });
  const std::int64_t id = static_cast<std::int64_t>(nodes_.size());
  output->node = id;
  output->requires_grad = true;
  nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
  return id;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss of shape " + shape_str(loss.shape()) +
                                " is not a scalar");
  }
  auto impl = loss.impl();
  if (!impl || impl->node < 0) {
    throw std::invalid_argument("backward: loss is not a tape result");
  }
  impl->ensure_grad();
  impl->grad[0] += T(1);
  visited_ = 0;
  for (std::int64_t i = impl->node; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.output->grad.empty()) continue;  // not reachable from the loss
    ++visited_;
    if (n.backward) n.backward();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tensor<std::uint8_t>;
template class Tape<float>;
template class Tape<double>;
template class Tape<std::uint8_t>;

}  // namespace cams
