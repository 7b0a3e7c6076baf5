#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cams/param_store.hpp"
#include "cams/ssm.hpp"
#include "cams/tensor.hpp"

namespace cams {

// Which projections of a Mamba block carry a bias term. The published counts
// pin the layout down only partially, so the flags stay configurable and the
// frozen defaults come from the reconciliation search below.
struct BiasFlags {
  bool w1 = true;
  bool w2 = true;
  bool w3 = true;
  bool x_proj = false;
};

struct NCMambaConfig {
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::int64_t expand_e = 2;
  std::int64_t d_state = 16;
  std::int64_t dt_rank = 0;  // 0 selects max(1, ceil(c_in / 16))
  BiasFlags bias;
  bool use_skip_d = true;
  // Parameter-free RMS norm on the block input. The stack has no learnable
  // normalization, so deep configs rely on this to keep activations in range;
  // off by default to match the published per-block accounting context.
  bool rms_norm = false;

  std::int64_t d_inner() const { return expand_e * c_in; }
  std::int64_t resolved_dt_rank() const {
    return dt_rank > 0 ? dt_rank : std::max<std::int64_t>(1, (c_in + 15) / 16);
  }
  void validate() const;
};

// Unfactorized reference block: E = 2, d_state = 16.
NCMambaConfig reference_nc_mamba(std::int64_t c_in, std::int64_t c_out);
// Factorized block: E = 1, d_state = 2.
NCMambaConfig factorized_nc_mamba(std::int64_t c_in, std::int64_t c_out);

// x_out = W3(silu(W2 x) (.) SSM(silu(W1 x))) over sequences [B, L, c_in].
template <typename T>
class NCMambaBlock {
 public:
  NCMambaBlock(ParamStore<T>& store, const std::string& prefix, NCMambaConfig cfg);

  Tensor<T> forward(const Tensor<T>& x) const;
  const NCMambaConfig& config() const { return cfg_; }
  std::int64_t param_count() const;

 private:
  NCMambaConfig cfg_;
  Tensor<T> w1_, b1_, w2_, b2_, w3_, b3_;
  SsmParams<T> ssm_;
};

struct LifmConfig {
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::int64_t d_state = 2;
  std::int64_t expand_e = 1;
  BiasFlags bias;
  bool use_skip_d = true;
  bool rms_norm = false;
};

// Factorized block (c -> c), linear interconnect (c -> c, no bias),
// factorized block (c -> c').
template <typename T>
class LifmBlock {
 public:
  LifmBlock(ParamStore<T>& store, const std::string& prefix, LifmConfig cfg);

  Tensor<T> forward(const Tensor<T>& x) const;
  const LifmConfig& config() const { return cfg_; }
  std::int64_t param_count() const;

 private:
  LifmConfig cfg_;
  NCMambaBlock<T> block1_;
  Tensor<T> w_fm_;
  NCMambaBlock<T> block2_;
};

// Deterministic accounting of trainable tensors.
struct CountRow {
  std::string name;
  Shape shape;
  std::int64_t count = 0;
};

struct CountTable {
  std::vector<CountRow> rows;
  std::int64_t total = 0;
};

CountTable nc_mamba_count(const NCMambaConfig& cfg);
CountTable lifm_count(const LifmConfig& cfg);

// Search over the 2^4 bias combinations x use_skip_d for the layout closest
// to the three published reference counts (more exact matches first, then
// smaller worst-case relative error).
struct ReconcileResult {
  BiasFlags flags;
  bool use_skip_d = true;
  std::int64_t nc_reference = 0;  // 32 -> 64, E=2, D=16, target 11776
  std::int64_t factorized = 0;    // 32 -> 64, E=1, D=2, target 4608
  std::int64_t lifm = 0;          // 32 -> 32 -> 64, target 9184
  int exact_matches = 0;
  bool exact_all = false;
  double max_rel_err = 0.0;
};

ReconcileResult reconcile_count_layout();

// Frozen outcome of the search, used by every default config.
BiasFlags frozen_bias_flags();
bool frozen_use_skip_d();

}  // namespace cams
