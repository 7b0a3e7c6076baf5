#include "cams/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace cams {

template <typename T>
AdamW<T>::AdamW(ParamStore<T>& store, AdamWConfig cfg) : store_(&store), cfg_(cfg) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (const auto& e : store.entries()) {
    m_.emplace_back(static_cast<std::size_t>(e.tensor.numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(e.tensor.numel()), T(0));
  }
}

template <typename T>
void AdamW<T>::step() {
  if (store_->size() != m_.size()) {
    throw std::logic_error("adamw: parameter store changed size after optimizer construction");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T beta1 = static_cast<T>(cfg_.beta1);
  const T beta2 = static_cast<T>(cfg_.beta2);
  const T one_m_beta1 = static_cast<T>(1.0 - cfg_.beta1);
  const T one_m_beta2 = static_cast<T>(1.0 - cfg_.beta2);
  const T lr = static_cast<T>(cfg_.lr);
  const T eps = static_cast<T>(cfg_.eps);
  const T decay = static_cast<T>(cfg_.lr * cfg_.weight_decay);
  const T inv_bc1 = static_cast<T>(1.0 / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);

  auto entries = store_->entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor<T> t = entries[p].tensor;
    if (!t.has_grad()) {
      throw std::logic_error("adamw: missing gradient for parameter '" + entries[p].name + "'");
    }
    auto g = t.grad();
    auto w = t.values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + one_m_beta1 * g[i];
      v[i] = beta2 * v[i] + one_m_beta2 * g[i] * g[i];
      const T mhat = m[i] * inv_bc1;
      const T vhat = v[i] * inv_bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps) + decay * w[i];
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace cams
