#pragma once

#include <cstdint>
#include <vector>

#include "cams/param_store.hpp"

namespace cams {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.55;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay over every entry of a ParamStore.
// step() consumes the gradients currently held by the parameters and throws
// if any parameter is missing one.
template <typename T>
class AdamW {
 public:
  AdamW(ParamStore<T>& store, AdamWConfig cfg);

  void step();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const AdamWConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

 private:
  ParamStore<T>* store_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace cams
