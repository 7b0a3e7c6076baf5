#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cams/aggregators.hpp"
#include "cams/param_store.hpp"
#include "cams/tensor.hpp"

#include "json.hpp"

namespace cams {

struct NetworkConfig {
  std::int64_t in_channels = 1;
  std::int64_t num_classes = 5;
  std::int64_t patch_size = 2;
  std::vector<std::int64_t> encoder_channels = {64, 128, 256, 512, 1024};
  std::vector<std::int64_t> decoder_channels = {512, 256, 128, 64};
  std::vector<std::string> csif_stages = {"enc4", "bottleneck", "dec1"};
  bool use_pos_embed = true;
  ScanMode scan_mode = ScanMode::Bidirectional;
  bool share_weights = true;
  bool residual_both_directions = false;
  double dropout_p = 0.1;
  // Parameter-free RMS norm at every block input. Off in the paper-scale
  // accounting config, on in the runnable presets: without it the deep
  // norm-free stack is one squaring away from overflow.
  bool rms_norm = false;
  std::int64_t input_h = 256;
  std::int64_t input_w = 256;

  std::int64_t embed_dim() const { return encoder_channels.empty() ? 0 : encoder_channels[0]; }
  void validate() const;

  nlohmann::json to_json() const;
  // Fields present in j override `base`; a "preset" key (tiny | desk | paper)
  // swaps the base out first.
  static NetworkConfig from_json(const nlohmann::json& j);
  static NetworkConfig from_json(const nlohmann::json& j, NetworkConfig base);
};

// Paper-scale configuration at a given square input size.
NetworkConfig paper_config(std::int64_t input = 256);
// Trainable-on-a-desk configuration: 64x64 input, channels [16..256].
NetworkConfig desk_config();
// Smallest valid configuration, for gradchecks: 32x32, channels [4..20].
NetworkConfig tiny_config();

struct StageInfo {
  std::string name;          // enc1..enc4, bottleneck, dec1..dec4
  bool is_csif = false;      // CS-IF fusion vs plain channel aggregator
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::int64_t height = 0;   // spatial dims the stage operates at
  std::int64_t width = 0;
  std::string skip_partner;  // encoder stage whose output is added, or empty
};

std::vector<StageInfo> stage_plan(const NetworkConfig& cfg);

// U-shaped assembly: patch embedding, fixed sinusoidal position table,
// aggregator encoder with 2x2 average pooling, aggregator decoder with x2
// bilinear upsampling and additive skips, then a final x2 upsample, a
// per-position class projection and a channel softmax.
template <typename T>
class CamsNet {
 public:
  CamsNet(ParamStore<T>& store, NetworkConfig cfg);
  ~CamsNet();
  CamsNet(CamsNet&&) noexcept;

  // img: [B, in_channels, H, W] -> per-pixel class probabilities
  // [B, num_classes, H, W], summing to 1 over the class axis.
  Tensor<T> forward(const Tensor<T>& img, bool training = false);

  const NetworkConfig& config() const { return cfg_; }

 private:
  struct Stage;
  NetworkConfig cfg_;
  Tensor<T> w_patch_, b_patch_;
  Tensor<T> pos_table_;  // [embed_dim, H/2, W/2], constant
  std::vector<Stage> stages_;
  Tensor<T> w_head_;
};

struct ParamReportRow {
  std::string stage;
  std::int64_t count = 0;
};

struct ParamReport {
  std::vector<ParamReportRow> rows;
  std::int64_t total = 0;
};

// Parameter totals grouped by stage for a network built from cfg.
ParamReport network_param_report(const NetworkConfig& cfg);

// The fixed sinusoidal table: PE[p, 2k] = sin(p / 10000^(2k / dim)),
// PE[p, 2k + 1] = cos of the same argument. dim must be even.
template <typename T>
Tensor<T> sinusoidal_table(std::int64_t len, std::int64_t dim);

}  // namespace cams
