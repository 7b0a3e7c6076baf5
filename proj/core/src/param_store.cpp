#include "cams/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace cams {

std::string_view InitRule::name() const {
  switch (kind) {
    case Kind::Zeros:
      return "zeros";
    case Kind::Ones:
      return "ones";
    case Kind::KaimingUniform:
      return "kaiming_uniform";
    case Kind::BiasUniform:
      return "bias_uniform";
    case Kind::Uniform:
      return "uniform";
    case Kind::ALogLadder:
      return "a_log_ladder";
    case Kind::DtProjWeight:
      return "dt_proj_weight";
    case Kind::DtBias:
      return "dt_bias";
  }
  return "?";
}

namespace {

template <typename T>
void fill_values(std::vector<T>& out, const Shape& shape, const InitRule& rule, RngStream rng) {
  switch (rule.kind) {
    case InitRule::Kind::Zeros:
      break;
    case InitRule::Kind::Ones:
      for (auto& v : out) v = T(1);
      break;
    case InitRule::Kind::KaimingUniform: {
      if (rule.arg0 <= 0) throw std::invalid_argument("init: kaiming_uniform needs fan_in > 0");
      const double bound = std::sqrt(3.0 / rule.arg0);
      for (auto& v : out) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitRule::Kind::BiasUniform: {
      if (rule.arg0 <= 0) throw std::invalid_argument("init: bias_uniform needs fan_in > 0");
      const double bound = 1.0 / std::sqrt(rule.arg0);
      for (auto& v : out) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitRule::Kind::Uniform: {
      if (rule.arg0 <= 0) throw std::invalid_argument("init: uniform needs bound > 0");
      for (auto& v : out) v = static_cast<T>(rng.uniform(-rule.arg0, rule.arg0));
      break;
    }
    case InitRule::Kind::ALogLadder: {
      if (shape.size() != 2) {
        throw std::invalid_argument("init: a_log_ladder expects [d_inner, d_state], got " +
                                    shape_str(shape));
      }
      const std::int64_t d_state = shape[1];
      for (std::int64_t c = 0; c < shape[0]; ++c) {
        for (std::int64_t s = 0; s < d_state; ++s) {
          out[static_cast<std::size_t>(c * d_state + s)] =
              static_cast<T>(std::log(static_cast<double>(s + 1)));
        }
      }
      break;
    }
    case InitRule::Kind::DtProjWeight: {
      if (rule.arg0 <= 0) throw std::invalid_argument("init: dt_proj_weight needs dt_rank > 0");
      const double bound = 1.0 / std::sqrt(rule.arg0);
      for (auto& v : out) v = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case InitRule::Kind::DtBias: {
      const double lo = rule.arg0, hi = rule.arg1;
      if (!(lo > 0) || !(hi > lo)) {
        throw std::invalid_argument("init: dt_bias needs 0 < lo < hi");
      }
      for (auto& v : out) {
        const double dt = std::exp(rng.uniform(std::log(lo), std::log(hi)));
        // Inverse of softplus so the first forward pass lands in [lo, hi].
        v = static_cast<T>(std::log(std::expm1(dt)));
      }
      break;
    }
  }
}

}  // namespace

template <typename T>
ParamStore<T>::ParamStore(std::uint64_t seed) : seed_(seed) {}

template <typename T>
Tensor<T> ParamStore<T>::create(const std::string& name, Shape shape, InitRule rule) {
  if (index_.count(name)) {
    throw std::invalid_argument("param_store: duplicate parameter name '" + name + "'");
  }
  std::vector<T> values(static_cast<std::size_t>(shape_numel(shape)), T{});
  fill_values(values, shape, rule, RngStream(seed_, name));
  Tensor<T> t(shape, std::move(values));
  t.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, t, rule});
  return t;
}

template <typename T>
bool ParamStore<T>::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

template <typename T>
Tensor<T> ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::invalid_argument("param_store: unknown parameter '" + name + "'");
  }
  return entries_[it->second].tensor;
}

template <typename T>
std::int64_t ParamStore<T>::total_count() const {
  std::int64_t n = 0;
  for (const Entry& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (Entry& e : entries_) e.tensor.zero_grad();
}

template <typename T>
void ParamStore<T>::load_values(const std::string& name, std::span<const T> values) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::invalid_argument("param_store: unknown parameter '" + name + "'");
  }
  Tensor<T> t = entries_[it->second].tensor;
  if (static_cast<std::size_t>(t.numel()) != values.size()) {
    throw std::invalid_argument("param_store: size mismatch loading '" + name + "': " +
                                std::to_string(values.size()) + " values for shape " +
                                shape_str(t.shape()));
  }
  std::copy(values.begin(), values.end(), t.values().begin());
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace cams
