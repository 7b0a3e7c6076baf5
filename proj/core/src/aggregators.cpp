#include "cams/aggregators.hpp"

#include <stdexcept>
#include <string>

#include "cams/ops.hpp"

namespace cams {

namespace {

template <typename T>
void check_input(const AggregatorConfig& cfg, const Tensor<T>& x, const char* name) {
  if (x.ndim() != 4 || x.dim(1) != cfg.c_in) {
    throw std::invalid_argument(std::string(name) + ": expected input [batch, " +
                                std::to_string(cfg.c_in) + ", H, W], got " +
                                shape_str(x.shape()));
  }
  if (x.dim(2) != cfg.height || x.dim(3) != cfg.width) {
    throw std::invalid_argument(std::string(name) + ": spatial dims " +
                                std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                                " do not match the construction-time " +
                                std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  }
}

LifmConfig lifm_for(std::int64_t c_in, std::int64_t c_out, bool rms_norm) {
  LifmConfig cfg;
  cfg.c_in = c_in;
  cfg.c_out = c_out;
  cfg.bias = frozen_bias_flags();
  cfg.use_skip_d = frozen_use_skip_d();
  cfg.rms_norm = rms_norm;
  return cfg;
}

// Row-major spatial flatten: [B, C, H, W] -> [B, L, C] and back.
template <typename T>
Tensor<T> to_position_seq(const Tensor<T>& x) {
  Tensor<T> t = permute(x, {0, 2, 3, 1});
  return reshape(t, {x.dim(0), x.dim(2) * x.dim(3), x.dim(1)});
}

template <typename T>
Tensor<T> from_position_seq(const Tensor<T>& s, std::int64_t h, std::int64_t w) {
  Tensor<T> t = reshape(s, {s.dim(0), h, w, s.dim(2)});
  return permute(t, {0, 3, 1, 2});
}

}  // namespace

void AggregatorConfig::validate() const {
  if (c_in < 1 || c_out < 1) {
    throw std::invalid_argument("aggregator: channel counts must be positive, got c_in=" +
                                std::to_string(c_in) + ", c_out=" + std::to_string(c_out));
  }
  if (height < 1 || width < 1) {
    throw std::invalid_argument("aggregator: spatial dims must be fixed at construction, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw std::invalid_argument("aggregator: dropout_p must be in [0, 1), got " +
                                std::to_string(dropout_p));
  }
}

template <typename T>
ChannelAggregator<T>::ChannelAggregator(ParamStore<T>& store, const std::string& prefix,
                                        AggregatorConfig cfg)
    : cfg_(cfg) {
  cfg_.validate();
  fwd_ = std::make_unique<LifmBlock<T>>(store, prefix + ".fwd", lifm_for(cfg_.c_in, cfg_.c_out, cfg_.rms_norm));
  if (cfg_.scan_mode == ScanMode::Bidirectional && !cfg_.share_weights) {
    bwd_ =
        std::make_unique<LifmBlock<T>>(store, prefix + ".bwd", lifm_for(cfg_.c_in, cfg_.c_out, cfg_.rms_norm));
  }
  w_c_ = store.create(prefix + ".w_c", {cfg_.c_in, cfg_.c_out},
                      InitRule::kaiming_uniform(cfg_.c_in));
}

template <typename T>
Tensor<T> ChannelAggregator<T>::forward(const Tensor<T>& x) const {
  check_input(cfg_, x, "channel aggregator");
  Tensor<T> s = to_position_seq(x);
  Tensor<T> acc = fwd_->forward(s);
  if (cfg_.scan_mode == ScanMode::Bidirectional) {
    const LifmBlock<T>& back = bwd_ ? *bwd_ : *fwd_;
    acc = add(acc, flip(back.forward(flip(s, 1)), 1));
  }
  acc = add(acc, linear(s, w_c_));
  if (cfg_.residual_both_directions && cfg_.scan_mode == ScanMode::Bidirectional) {
    acc = add(acc, flip(linear(flip(s, 1), w_c_), 1));
  }
  return from_position_seq(acc, cfg_.height, cfg_.width);
}

template <typename T>
std::int64_t ChannelAggregator<T>::param_count() const {
  return fwd_->param_count() + (bwd_ ? bwd_->param_count() : 0) + w_c_.numel();
}

template <typename T>
SpatialAggregator<T>::SpatialAggregator(ParamStore<T>& store, const std::string& prefix,
                                        AggregatorConfig cfg)
    : cfg_(cfg) {
  cfg_.validate();
  const std::int64_t len = cfg_.seq_len();
  fwd_ = std::make_unique<LifmBlock<T>>(store, prefix + ".fwd", lifm_for(len, len, cfg_.rms_norm));
  if (cfg_.scan_mode == ScanMode::Bidirectional && !cfg_.share_weights) {
    bwd_ = std::make_unique<LifmBlock<T>>(store, prefix + ".bwd", lifm_for(len, len, cfg_.rms_norm));
  }
  w_s_ = store.create(prefix + ".w_s", {len, len},
                      InitRule::kaiming_uniform(len));
  w_ci_ = store.create(prefix + ".w_ci", {cfg_.c_in, cfg_.c_out},
                       InitRule::kaiming_uniform(cfg_.c_in));
}

template <typename T>
Tensor<T> SpatialAggregator<T>::forward(const Tensor<T>& x) const {
  check_input(cfg_, x, "spatial aggregator");
  Tensor<T> s = reshape(x, {x.dim(0), cfg_.c_in, cfg_.seq_len()});
  Tensor<T> acc = fwd_->forward(s);
  if (cfg_.scan_mode == ScanMode::Bidirectional) {
    const LifmBlock<T>& back = bwd_ ? *bwd_ : *fwd_;
    acc = add(acc, flip(back.forward(flip(s, 1)), 1));
  }
  acc = add(acc, linear(s, w_s_));
  if (cfg_.residual_both_directions && cfg_.scan_mode == ScanMode::Bidirectional) {
    acc = add(acc, flip(linear(flip(s, 1), w_s_), 1));
  }
  Tensor<T> grid = reshape(acc, {x.dim(0), cfg_.c_in, cfg_.height, cfg_.width});
  Tensor<T> pos_major = permute(grid, {0, 2, 3, 1});
  Tensor<T> projected = linear(pos_major, w_ci_);
  return permute(projected, {0, 3, 1, 2});
}

template <typename T>
std::int64_t SpatialAggregator<T>::param_count() const {
  return fwd_->param_count() + (bwd_ ? bwd_->param_count() : 0) + w_s_.numel() + w_ci_.numel();
}

template <typename T>
CsifModule<T>::CsifModule(ParamStore<T>& store, const std::string& prefix, AggregatorConfig cfg)
    : cfg_(cfg),
      mca_(store, prefix + ".mca", [&] {
        AggregatorConfig c = cfg;
        c.kind = AggregatorKind::Channel;
        return c;
      }()),
      msa_(store, prefix + ".msa", [&] {
        AggregatorConfig c = cfg;
        c.kind = AggregatorKind::Spatial;
        return c;
      }()),
      drop_mca_(store.seed(), prefix + ".dropout.mca"),
      drop_msa_(store.seed(), prefix + ".dropout.msa") {}

template <typename T>
Tensor<T> CsifModule<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> a = dropout(mca_.forward(x), cfg_.dropout_p, training, drop_mca_);
  Tensor<T> b = dropout(msa_.forward(x), cfg_.dropout_p, training, drop_msa_);
  if (a.shape() != b.shape()) {
    throw std::logic_error("csif: aggregator outputs disagree, " + shape_str(a.shape()) +
                           " vs " + shape_str(b.shape()));
  }
  return add(a, b);
}

template <typename T>
std::int64_t CsifModule<T>::param_count() const {
  return mca_.param_count() + msa_.param_count();
}

std::pair<std::int64_t, std::int64_t> count_shared_vs_unshared(const AggregatorConfig& cfg) {
  auto total = [&](bool share) {
    AggregatorConfig c = cfg;
    c.share_weights = share;
    ParamStore<float> store(0);
    if (cfg.kind == AggregatorKind::Channel) {
      ChannelAggregator<float> agg(store, "agg", c);
      return agg.param_count();
    }
    SpatialAggregator<float> agg(store, "agg", c);
    return agg.param_count();
  };
  return {total(true), total(false)};
}

template class ChannelAggregator<float>;
template class ChannelAggregator<double>;
template class SpatialAggregator<float>;
template class SpatialAggregator<double>;
template class CsifModule<float>;
template class CsifModule<double>;

}  // namespace cams
