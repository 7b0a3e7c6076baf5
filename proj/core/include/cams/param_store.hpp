#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cams/rng.hpp"
#include "cams/tensor.hpp"

namespace cams {

// Initialization recipe for one parameter tensor.
struct InitRule {
  enum class Kind {
    Zeros,
    Ones,
    KaimingUniform,  // U(+-sqrt(3 / fan_in))
    BiasUniform,     // U(+-fan_in^-1/2)
    Uniform,         // U(+-bound)
    ALogLadder,      // row c = ln(1), ln(2), ..., ln(d_state)
    DtProjWeight,    // U(+-dt_rank^-1/2)
    DtBias,          // inverse softplus of dt ~ LogUniform(lo, hi)
  };
  Kind kind = Kind::Zeros;
  double arg0 = 0.0;
  double arg1 = 0.0;

  static InitRule zeros() { return {Kind::Zeros, 0, 0}; }
  static InitRule ones() { return {Kind::Ones, 0, 0}; }
  static InitRule kaiming_uniform(std::int64_t fan_in) {
    return {Kind::KaimingUniform, static_cast<double>(fan_in), 0};
  }
  // Non-zero biases spread the activation knees apart at init, which a
  // shallow-feature head needs to tell interior intensity bands apart.
  static InitRule bias_uniform(std::int64_t fan_in) {
    return {Kind::BiasUniform, static_cast<double>(fan_in), 0};
  }
  static InitRule uniform(double bound) { return {Kind::Uniform, bound, 0}; }
  static InitRule a_log_ladder() { return {Kind::ALogLadder, 0, 0}; }
  static InitRule dt_proj_weight(std::int64_t dt_rank) {
    return {Kind::DtProjWeight, static_cast<double>(dt_rank), 0};
  }
  static InitRule dt_bias(double dt_min = 1e-3, double dt_max = 0.1) {
    return {Kind::DtBias, dt_min, dt_max};
  }
  std::string_view name() const;
};

// Named, ordered collection of trainable tensors. Names are hierarchical
// dot-separated paths and must be unique. Initial values are drawn from a
// stream derived from (seed, name), so they do not depend on the order in
// which modules register their parameters.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    InitRule init;
  };

  explicit ParamStore(std::uint64_t seed);

  Tensor<T> create(const std::string& name, Shape shape, InitRule rule);
  bool contains(const std::string& name) const;
  Tensor<T> at(const std::string& name) const;
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t total_count() const;
  void zero_grad();
  std::uint64_t seed() const { return seed_; }

  // Overwrites the values of an existing entry (checkpoint restore).
  void load_values(const std::string& name, std::span<const T> values);

 private:
  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace cams
