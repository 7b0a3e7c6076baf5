#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "cams/blocks.hpp"
#include "cams/param_store.hpp"
#include "cams/rng.hpp"
#include "cams/tensor.hpp"

namespace cams {

enum class ScanMode { Unidirectional, Bidirectional };

enum class AggregatorKind { Channel, Spatial };

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::Channel;
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::int64_t height = 0;  // fixed at construction; L = height * width
  std::int64_t width = 0;
  ScanMode scan_mode = ScanMode::Bidirectional;
  bool share_weights = true;
  // Evaluate the residual linear on the flipped orientation as well. Off by
  // default: the residual appears once, on the forward orientation.
  bool residual_both_directions = false;
  double dropout_p = 0.1;  // used by the fusion module only
  bool rms_norm = false;   // forwarded to the LIFM blocks

  std::int64_t seq_len() const { return height * width; }
  void validate() const;
};

// Channel aggregator: scans the spatial positions as a sequence of channel
// vectors. s = reshape(x) to [B, L, C] with row-major spatial flatten,
// out = unflatten(LIFM(s) + flip(LIFM(flip s)) + s W_c), W_c: C -> C_out.
template <typename T>
class ChannelAggregator {
 public:
  ChannelAggregator(ParamStore<T>& store, const std::string& prefix, AggregatorConfig cfg);

  Tensor<T> forward(const Tensor<T>& x) const;  // [B, C, H, W] -> [B, C_out, H, W]
  const AggregatorConfig& config() const { return cfg_; }
  std::int64_t param_count() const;

 private:
  AggregatorConfig cfg_;
  std::unique_ptr<LifmBlock<T>> fwd_;
  std::unique_ptr<LifmBlock<T>> bwd_;  // only when bidirectional and unshared
  Tensor<T> w_c_;
};

// Spatial aggregator: scans the channels as a sequence of per-position rows.
// s = reshape(x) to [B, C, L]; LIFM preserves the feature width L, the
// residual is s W_s (W_s: L -> L), bidirectional flips along the channel
// axis, and W_ci: C -> C_out changes channels per spatial position.
template <typename T>
class SpatialAggregator {
 public:
  SpatialAggregator(ParamStore<T>& store, const std::string& prefix, AggregatorConfig cfg);

  Tensor<T> forward(const Tensor<T>& x) const;  // [B, C, H, W] -> [B, C_out, H, W]
  const AggregatorConfig& config() const { return cfg_; }
  std::int64_t param_count() const;

 private:
  AggregatorConfig cfg_;
  std::unique_ptr<LifmBlock<T>> fwd_;
  std::unique_ptr<LifmBlock<T>> bwd_;
  Tensor<T> w_s_;
  Tensor<T> w_ci_;
};

// Fusion of both aggregators: out = dropout(MCA(x)) + dropout(MSA(x)).
// Dropout masks come from a stream seeded by (store seed, prefix), so a
// given instance replays deterministically.
template <typename T>
class CsifModule {
 public:
  CsifModule(ParamStore<T>& store, const std::string& prefix, AggregatorConfig cfg);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  const AggregatorConfig& config() const { return cfg_; }
  std::int64_t param_count() const;

 private:
  AggregatorConfig cfg_;
  ChannelAggregator<T> mca_;
  SpatialAggregator<T> msa_;
  RngStream drop_mca_;
  RngStream drop_msa_;
};

// Parameter totals of one aggregator with share_weights forced on vs off.
// Bidirectional configs differ by exactly one LIFM; unidirectional ones tie.
std::pair<std::int64_t, std::int64_t> count_shared_vs_unshared(const AggregatorConfig& cfg);

}  // namespace cams
