#include "cams/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "cams/ops.hpp"

namespace cams {

namespace {

constexpr int kPoolStages = 4;

ScanMode scan_mode_from_string(const std::string& s) {
  if (s == "unidirectional") return ScanMode::Unidirectional;
  if (s == "bidirectional") return ScanMode::Bidirectional;
  throw std::invalid_argument("network config: unknown scan_mode '" + s + "'");
}

std::string scan_mode_to_string(ScanMode m) {
  return m == ScanMode::Unidirectional ? "unidirectional" : "bidirectional";
}

}  // namespace

void NetworkConfig::validate() const {
  if (in_channels < 1) throw std::invalid_argument("network config: in_channels must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("network config: num_classes must be >= 2");
  if (patch_size < 1 || (patch_size & (patch_size - 1)) != 0) {
    throw std::invalid_argument(
        "network config: patch_size must be a power of two (the final upsample restores it by "
        "doublings), got " +
        std::to_string(patch_size));
  }
  if (encoder_channels.size() != 5) {
    throw std::invalid_argument("network config: encoder_channels must list 5 stages, got " +
                                std::to_string(encoder_channels.size()));
  }
  for (std::size_t i = 0; i + 1 < encoder_channels.size(); ++i) {
    if (encoder_channels[i] >= encoder_channels[i + 1]) {
      throw std::invalid_argument("network config: encoder_channels must be strictly increasing");
    }
  }
  if (decoder_channels.size() != 4) {
    throw std::invalid_argument("network config: decoder_channels must list 4 stages, got " +
                                std::to_string(decoder_channels.size()));
  }
  for (std::size_t i = 0; i < decoder_channels.size(); ++i) {
    if (decoder_channels[i] != encoder_channels[3 - i]) {
      throw std::invalid_argument(
          "network config: decoder_channels must mirror the encoder prefix");
    }
  }
  if (embed_dim() % 2 != 0) {
    throw std::invalid_argument("network config: embed dim must be even for the position table");
  }
  const std::int64_t divisor = patch_size << kPoolStages;
  if (input_h < divisor || input_w < divisor || input_h % divisor != 0 ||
      input_w % divisor != 0) {
    throw std::invalid_argument("network config: input " + std::to_string(input_h) + "x" +
                                std::to_string(input_w) + " must be a multiple of " +
                                std::to_string(divisor) +
                                " (patch size times one halving per pooling stage)");
  }
  static const std::vector<std::string> known = {"enc1", "enc2",       "enc3", "enc4",
                                                 "dec1", "dec2",       "dec3", "dec4",
                                                 "bottleneck"};
  for (const std::string& s : csif_stages) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw std::invalid_argument("network config: unknown csif stage '" + s + "'");
    }
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw std::invalid_argument("network config: dropout_p must be in [0, 1)");
  }
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"in_channels", in_channels},
          {"num_classes", num_classes},
          {"patch_size", patch_size},
          {"encoder_channels", encoder_channels},
          {"decoder_channels", decoder_channels},
          {"csif_stages", csif_stages},
          {"use_pos_embed", use_pos_embed},
          {"scan_mode", scan_mode_to_string(scan_mode)},
          {"share_weights", share_weights},
          {"residual_both_directions", residual_both_directions},
          {"dropout_p", dropout_p},
          {"rms_norm", rms_norm},
          {"input_h", input_h},
          {"input_w", input_w}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  return from_json(j, NetworkConfig());
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j, NetworkConfig base) {
  if (j.contains("preset")) {
    const auto name = j.at("preset").get<std::string>();
    if (name == "tiny") {
      base = tiny_config();
    } else if (name == "desk") {
      base = desk_config();
    } else if (name == "paper") {
      base = paper_config();
    } else {
      throw std::invalid_argument("network config: unknown preset '" + name +
                                  "' (expected tiny, desk or paper)");
    }
  }
  NetworkConfig cfg = std::move(base);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("in_channels", cfg.in_channels);
  get("num_classes", cfg.num_classes);
  get("patch_size", cfg.patch_size);
  get("encoder_channels", cfg.encoder_channels);
  get("decoder_channels", cfg.decoder_channels);
  get("csif_stages", cfg.csif_stages);
  get("use_pos_embed", cfg.use_pos_embed);
  if (j.contains("scan_mode")) {
    cfg.scan_mode = scan_mode_from_string(j.at("scan_mode").get<std::string>());
  }
  get("share_weights", cfg.share_weights);
  get("residual_both_directions", cfg.residual_both_directions);
  get("dropout_p", cfg.dropout_p);
  get("rms_norm", cfg.rms_norm);
  get("input_h", cfg.input_h);
  get("input_w", cfg.input_w);
  return cfg;
}

NetworkConfig paper_config(std::int64_t input) {
  NetworkConfig cfg;
  cfg.input_h = input;
  cfg.input_w = input;
  return cfg;
}

NetworkConfig desk_config() {
  NetworkConfig cfg;
  cfg.encoder_channels = {16, 32, 64, 128, 256};
  cfg.decoder_channels = {128, 64, 32, 16};
  cfg.rms_norm = true;
  cfg.input_h = 64;
  cfg.input_w = 64;
  return cfg;
}

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.encoder_channels = {4, 8, 12, 16, 20};
  cfg.decoder_channels = {16, 12, 8, 4};
  cfg.rms_norm = true;
  cfg.input_h = 32;
  cfg.input_w = 32;
  return cfg;
}

std::vector<StageInfo> stage_plan(const NetworkConfig& cfg) {
  cfg.validate();
  const auto& c = cfg.encoder_channels;
  const std::int64_t h1 = cfg.input_h / cfg.patch_size;
  const std::int64_t w1 = cfg.input_w / cfg.patch_size;
  auto is_csif = [&](const std::string& name) {
    return std::find(cfg.csif_stages.begin(), cfg.csif_stages.end(), name) !=
           cfg.csif_stages.end();
  };
  std::vector<StageInfo> plan;
  auto push = [&](std::string name, std::int64_t ci, std::int64_t co, int shift,
                  std::string skip) {
    plan.push_back({name, is_csif(name), ci, co, h1 >> shift, w1 >> shift, std::move(skip)});
  };
  push("enc1", c[0], c[0], 0, "");
  push("enc2", c[0], c[1], 1, "");
  push("enc3", c[1], c[2], 2, "");
  push("enc4", c[2], c[3], 3, "");
  push("bottleneck", c[3], c[4], 4, "");
  push("dec1", c[4], c[3], 3, "enc4");
  push("dec2", c[3], c[2], 2, "enc3");
  push("dec3", c[2], c[1], 1, "enc2");
  push("dec4", c[1], c[0], 0, "enc1");
  return plan;
}

template <typename T>
struct CamsNet<T>::Stage {
  StageInfo info;
  std::unique_ptr<ChannelAggregator<T>> mca;
  std::unique_ptr<CsifModule<T>> csif;

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return csif ? csif->forward(x, training) : mca->forward(x);
  }
};

template <typename T>
Tensor<T> sinusoidal_table(std::int64_t len, std::int64_t dim) {
  if (dim % 2 != 0) {
    throw std::invalid_argument("sinusoidal_table: dim must be even, got " +
                                std::to_string(dim));
  }
  Tensor<T> table({len, dim});
  auto v = table.values();
  for (std::int64_t p = 0; p < len; ++p) {
    for (std::int64_t k = 0; 2 * k < dim; ++k) {
      const double angle =
          static_cast<double>(p) /
          std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(dim));
      v[p * dim + 2 * k] = static_cast<T>(std::sin(angle));
      v[p * dim + 2 * k + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return table;
}

template <typename T>
CamsNet<T>::CamsNet(ParamStore<T>& store, NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::int64_t c1 = cfg_.embed_dim();
  const std::int64_t patch_len = cfg_.patch_size * cfg_.patch_size * cfg_.in_channels;
  const std::int64_t h1 = cfg_.input_h / cfg_.patch_size;
  const std::int64_t w1 = cfg_.input_w / cfg_.patch_size;

  w_patch_ = store.create("patch_embed.w", {patch_len, c1}, InitRule::kaiming_uniform(patch_len));
  b_patch_ = store.create("patch_embed.b", {c1}, InitRule::bias_uniform(patch_len));
  if (cfg_.use_pos_embed) {
    Tensor<T> flat = sinusoidal_table<T>(h1 * w1, c1);  // [L, C1]
    pos_table_ = permute(flat, {1, 0});
    pos_table_ = reshape(pos_table_, {c1, h1, w1});
  }

  for (const StageInfo& info : stage_plan(cfg_)) {
    AggregatorConfig acfg;
    acfg.c_in = info.c_in;
    acfg.c_out = info.c_out;
    acfg.height = info.height;
    acfg.width = info.width;
    acfg.scan_mode = cfg_.scan_mode;
    acfg.share_weights = cfg_.share_weights;
    acfg.residual_both_directions = cfg_.residual_both_directions;
    acfg.dropout_p = cfg_.dropout_p;
    acfg.rms_norm = cfg_.rms_norm;
    Stage stage;
    stage.info = info;
    if (info.is_csif) {
      stage.csif = std::make_unique<CsifModule<T>>(store, info.name, acfg);
    } else {
      acfg.kind = AggregatorKind::Channel;
      stage.mca = std::make_unique<ChannelAggregator<T>>(store, info.name, acfg);
    }
    stages_.push_back(std::move(stage));
  }

  // Small head init: large enough to break argmax ties from the start, small
  // enough that no class begins in a deep logit hole it must climb out of.
  const double head_bound = 0.1 * std::sqrt(3.0 / static_cast<double>(c1));
  w_head_ = store.create("head.w", {c1, cfg_.num_classes}, InitRule::uniform(head_bound));
}

template <typename T>
CamsNet<T>::~CamsNet() = default;

template <typename T>
CamsNet<T>::CamsNet(CamsNet&&) noexcept = default;

template <typename T>
Tensor<T> CamsNet<T>::forward(const Tensor<T>& img, bool training) {
  if (img.ndim() != 4 || img.dim(1) != cfg_.in_channels || img.dim(2) != cfg_.input_h ||
      img.dim(3) != cfg_.input_w) {
    throw std::invalid_argument(
        "network: expected input [batch, " + std::to_string(cfg_.in_channels) + ", " +
        std::to_string(cfg_.input_h) + ", " + std::to_string(cfg_.input_w) + "], got " +
        shape_str(img.shape()));
  }
  const std::int64_t b = img.dim(0);
  const std::int64_t ps = cfg_.patch_size;
  const std::int64_t h1 = cfg_.input_h / ps;
  const std::int64_t w1 = cfg_.input_w / ps;

  // Non-overlapping patches, flattened and projected to the embed dim.
  Tensor<T> x = reshape(img, {b, cfg_.in_channels, h1, ps, w1, ps});
  x = permute(x, {0, 2, 4, 1, 3, 5});
  x = reshape(x, {b, h1, w1, cfg_.in_channels * ps * ps});
  x = linear(x, w_patch_, b_patch_);
  x = permute(x, {0, 3, 1, 2});
  if (cfg_.use_pos_embed) x = add(x, pos_table_);

  std::map<std::string, Tensor<T>> skips;
  for (Stage& stage : stages_) {
    const std::string& name = stage.info.name;
    if (name.rfind("enc", 0) == 0) {
      x = stage.forward(x, training);
      skips[name] = x;
      x = avg_pool2d(x);
    } else if (name == "bottleneck") {
      x = stage.forward(x, training);
    } else {
      x = bilinear_upsample2d(x);
      x = stage.forward(x, training);
      x = add(x, skips.at(stage.info.skip_partner));
    }
  }

  for (std::int64_t p = cfg_.patch_size; p > 1; p /= 2) x = bilinear_upsample2d(x);
  x = permute(x, {0, 2, 3, 1});
  if (cfg_.rms_norm) x = rms_norm(x);
  x = linear(x, w_head_);
  x = permute(x, {0, 3, 1, 2});
  return softmax(x, 1);
}

ParamReport network_param_report(const NetworkConfig& cfg) {
  ParamStore<float> store(0);
  CamsNet<float> net(store, cfg);
  ParamReport report;
  std::map<std::string, std::size_t> row_of;
  for (const auto& e : store.entries()) {
    const std::string stage = e.name.substr(0, e.name.find('.'));
    auto [it, inserted] = row_of.try_emplace(stage, report.rows.size());
    if (inserted) report.rows.push_back({stage, 0});
    report.rows[it->second].count += e.tensor.numel();
    report.total += e.tensor.numel();
  }
  return report;
}

template Tensor<float> sinusoidal_table<float>(std::int64_t, std::int64_t);
template Tensor<double> sinusoidal_table<double>(std::int64_t, std::int64_t);
template class CamsNet<float>;
template class CamsNet<double>;

}  // namespace cams
