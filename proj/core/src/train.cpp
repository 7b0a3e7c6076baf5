#include "cams/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "cams/ctf.hpp"
#include "cams/ops.hpp"
#include "cams/optimizer.hpp"

namespace cams {

namespace fs = std::filesystem;

void RunConfig::finalize() {
  if (!msa_on) network.csif_stages.clear();
  network.scan_mode = bidirectional ? ScanMode::Bidirectional : ScanMode::Unidirectional;
  network.share_weights = share_weights;
  network.use_pos_embed = pos_embed;
}

void RunConfig::validate() const {
  network.validate();
  if (lr <= 0.0) throw std::invalid_argument("run config: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("run config: betas must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("run config: weight_decay must be >= 0");
  if (halve_every < 1) throw std::invalid_argument("run config: halve_every must be >= 1");
  if (epochs < 1) throw std::invalid_argument("run config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("run config: batch_size must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("run config: max_steps must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("run config: eval_every must be >= 1");
  if (dtype != "f32" && dtype != "f64") {
    throw std::invalid_argument("run config: dtype must be f32 or f64, got '" + dtype + "'");
  }
  if (val_fold < -1 || val_fold > 4) {
    throw std::invalid_argument("run config: val_fold must be -1..4");
  }
  if (augment.noise_sigma < 0.0) {
    throw std::invalid_argument("run config: augment noise sigma must be >= 0");
  }
}

nlohmann::json RunConfig::to_json() const {
  return {{"network", network.to_json()},
          {"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"weight_decay", weight_decay},
          {"halve_every", halve_every},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"max_steps", max_steps},
          {"eval_every", eval_every},
          {"seed", seed},
          {"dtype", dtype},
          {"val_fold", val_fold},
          {"loss_include_background", loss_include_background},
          {"hd_spacing", hd_spacing},
          {"augment",
           {{"hflip", augment.hflip},
            {"vflip", augment.vflip},
            {"rot90", augment.rot90},
            {"noise_sigma", augment.noise_sigma}}},
          {"msa_on", msa_on},
          {"bidirectional", bidirectional},
          {"share_weights", share_weights},
          {"pos_embed", pos_embed}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  auto field = [&](const nlohmann::json& src, const char* key, auto& dst) {
    if (!src.contains(key)) return;
    try {
      dst = src.at(key).template get<std::decay_t<decltype(dst)>>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(std::string("run config: field '") + key + "': " + e.what());
    }
  };
  if (j.contains("network")) {
    try {
      cfg.network = NetworkConfig::from_json(j.at("network"), cfg.network);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("run config: field 'network': ") + e.what());
    }
  }
  field(j, "lr", cfg.lr);
  field(j, "beta1", cfg.beta1);
  field(j, "beta2", cfg.beta2);
  field(j, "weight_decay", cfg.weight_decay);
  field(j, "halve_every", cfg.halve_every);
  field(j, "epochs", cfg.epochs);
  field(j, "batch_size", cfg.batch_size);
  field(j, "max_steps", cfg.max_steps);
  field(j, "eval_every", cfg.eval_every);
  field(j, "seed", cfg.seed);
  field(j, "dtype", cfg.dtype);
  field(j, "val_fold", cfg.val_fold);
  field(j, "loss_include_background", cfg.loss_include_background);
  field(j, "hd_spacing", cfg.hd_spacing);
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    field(a, "hflip", cfg.augment.hflip);
    field(a, "vflip", cfg.augment.vflip);
    field(a, "rot90", cfg.augment.rot90);
    field(a, "noise_sigma", cfg.augment.noise_sigma);
  }
  field(j, "msa_on", cfg.msa_on);
  field(j, "bidirectional", cfg.bidirectional);
  field(j, "share_weights", cfg.share_weights);
  field(j, "pos_embed", cfg.pos_embed);
  return cfg;
}

double lr_for_epoch(double lr0, std::int64_t halve_every, std::int64_t epoch) {
  return lr0 * std::pow(0.5, static_cast<double>(epoch / halve_every));
}

template <typename T>
void save_checkpoint(const std::string& dir, const ParamStore<T>& store, const RunConfig& cfg,
                     std::int64_t step, std::int64_t epoch) {
  fs::create_directories(dir);
  nlohmann::json params = nlohmann::json::array();
  std::vector<T> flat;
  flat.reserve(static_cast<std::size_t>(store.total_count()));
  for (const auto& e : store.entries()) {
    params.push_back({{"name", e.name}, {"shape", e.tensor.shape()}});
    auto v = e.tensor.values();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  nlohmann::json state = {{"step", step}, {"epoch", epoch}, {"params", params}};

  std::ofstream cf(fs::path(dir) / "config.json", std::ios::trunc);
  cf << cfg.to_json().dump(2) << "\n";
  std::ofstream sf(fs::path(dir) / "state.json", std::ios::trunc);
  sf << state.dump(2) << "\n";
  if (!cf || !sf) throw std::runtime_error("checkpoint: write failure in " + dir);
  const auto flat_len = static_cast<std::int64_t>(flat.size());
  Tensor<T> all({flat_len}, std::move(flat));
  ctf_write((fs::path(dir) / "params.ctf").string(), all);
}

template <typename T>
void load_checkpoint(const std::string& dir, ParamStore<T>& store) {
  std::ifstream sf(fs::path(dir) / "state.json");
  if (!sf) throw std::runtime_error("checkpoint: cannot open " + dir + "/state.json");
  nlohmann::json state = nlohmann::json::parse(sf);
  const auto& params = state.at("params");
  if (params.size() != store.size()) {
    throw std::runtime_error("checkpoint: holds " + std::to_string(params.size()) +
                             " parameters, network has " + std::to_string(store.size()));
  }
  Tensor<T> all = ctf_read<T>((fs::path(dir) / "params.ctf").string());
  auto flat = all.values();
  std::size_t offset = 0;
  std::size_t i = 0;
  for (const auto& e : store.entries()) {
    const std::string name = params[i].at("name").get<std::string>();
    const Shape shape = params[i].at("shape").get<Shape>();
    if (name != e.name || shape != e.tensor.shape()) {
      throw std::runtime_error("checkpoint: parameter mismatch at index " + std::to_string(i) +
                               ": checkpoint has '" + name + "' " + shape_str(shape) +
                               ", network has '" + e.name + "' " + shape_str(e.tensor.shape()));
    }
    const std::size_t n = static_cast<std::size_t>(e.tensor.numel());
    if (offset + n > flat.size()) {
      throw std::runtime_error("checkpoint: params.ctf shorter than the parameter list");
    }
    store.load_values(e.name, flat.subspan(offset, n));
    offset += n;
    ++i;
  }
  if (offset != flat.size()) {
    throw std::runtime_error("checkpoint: params.ctf longer than the parameter list");
  }
}

RunConfig checkpoint_config(const std::string& dir) {
  std::ifstream cf(fs::path(dir) / "config.json");
  if (!cf) throw std::runtime_error("checkpoint: cannot open " + dir + "/config.json");
  return RunConfig::from_json(nlohmann::json::parse(cf));
}

namespace {

template <typename T>
Tensor<T> stack_images(const std::vector<Sample>& samples, std::span<const std::size_t> ids) {
  const Shape& one = samples[ids[0]].image.shape();  // [1, H, W]
  Tensor<T> out({static_cast<std::int64_t>(ids.size()), one[0], one[1], one[2]});
  auto dst = out.values();
  std::size_t off = 0;
  for (std::size_t id : ids) {
    auto src = samples[id].image.values();
    for (float v : src) dst[off++] = static_cast<T>(v);
  }
  return out;
}

Tensor<std::uint8_t> stack_labels(const std::vector<Sample>& samples,
                                  std::span<const std::size_t> ids) {
  const Shape& one = samples[ids[0]].label.shape();  // [H, W]
  Tensor<std::uint8_t> out({static_cast<std::int64_t>(ids.size()), one[0], one[1]});
  auto dst = out.values();
  std::size_t off = 0;
  for (std::size_t id : ids) {
    auto src = samples[id].label.values();
    for (std::uint8_t v : src) dst[off++] = v;
  }
  return out;
}

template <typename T>
EvalReport evaluate_samples(CamsNet<T>& net, const std::vector<Sample>& samples,
                            std::span<const std::size_t> ids, const RunConfig& cfg) {
  EvalAccumulator acc(static_cast<int>(cfg.network.num_classes), cfg.hd_spacing);
  for (std::size_t id : ids) {
    const std::size_t one[] = {id};
    Tensor<T> img = stack_images<T>(samples, one);
    Tensor<T> probs = net.forward(img, false);
    Tensor<std::uint8_t> pred = argmax_labels(probs);
    Tensor<std::uint8_t> map = reshape(pred, {pred.dim(1), pred.dim(2)});
    acc.add(map, samples[id].label);
  }
  return acc.report();
}

struct LoadedData {
  std::vector<Sample> samples;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> eval_ids;
};

LoadedData load_data(const std::string& data_dir, int val_fold) {
  const std::string manifest = (fs::path(data_dir) / "manifest.jsonl").string();
  std::vector<ManifestEntry> entries = read_manifest(manifest);
  if (entries.empty()) throw std::runtime_error("train: " + manifest + " lists no samples");
  LoadedData data;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    data.samples.push_back(load_sample(data_dir, entries[i]));
    if (val_fold < 0 || entries[i].fold != val_fold) data.train_ids.push_back(i);
    if (val_fold < 0 || entries[i].fold == val_fold) data.eval_ids.push_back(i);
  }
  if (data.train_ids.empty()) throw std::runtime_error("train: no training samples left");
  if (data.eval_ids.empty()) throw std::runtime_error("train: no evaluation samples in fold");
  return data;
}

template <typename T>
TrainResult run_typed(const RunConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir) {
  LoadedData data = load_data(data_dir, cfg.val_fold);
  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot open " + log_path);

  ParamStore<T> store(cfg.seed);
  CamsNet<T> net(store, cfg.network);
  AdamWConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW<T> opt(store, ocfg);
  RngStream aug_rng(cfg.seed, "augment");

  const bool augmenting =
      cfg.augment.hflip || cfg.augment.vflip || cfg.augment.rot90 || cfg.augment.noise_sigma > 0;

  TrainResult result;
  result.checkpoint_dir = (fs::path(out_dir) / "checkpoint").string();
  result.log_path = log_path;
  std::int64_t step = 0;
  bool stop = false;
  std::int64_t epoch = 0;
  for (; epoch < cfg.epochs && !stop; ++epoch) {
    opt.set_lr(lr_for_epoch(cfg.lr, cfg.halve_every, epoch));
    std::vector<std::size_t> order = data.train_ids;
    RngStream order_rng(cfg.seed, "order.epoch." + std::to_string(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.next_below(i))]);
    }

    for (std::size_t b0 = 0; b0 < order.size() && !stop; b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> ids(order.data() + b0, b1 - b0);

      std::vector<Sample> scratch;
      Tensor<T> images;
      Tensor<std::uint8_t> labels;
      if (augmenting) {
        std::vector<std::size_t> local;
        for (std::size_t id : ids) {
          scratch.push_back(augment(data.samples[id], aug_rng, cfg.augment));
          local.push_back(scratch.size() - 1);
        }
        images = stack_images<T>(scratch, local);
        labels = stack_labels(scratch, local);
      } else {
        images = stack_images<T>(data.samples, ids);
        labels = stack_labels(data.samples, ids);
      }

      const auto t0 = std::chrono::steady_clock::now();
      double loss_value = 0.0;
      {
        Tape<T> tape;
        Tensor<T> probs = net.forward(images, true);
        Tensor<T> loss = dice_loss(probs, labels, 1e-6, cfg.loss_include_background);
        tape.backward(loss);
        loss_value = static_cast<double>(loss.item());
      }
      opt.step();
      store.zero_grad();
      ++step;
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();

      log << nlohmann::json{{"step", step},
                            {"epoch", epoch},
                            {"lr", opt.lr()},
                            {"loss", loss_value},
                            {"wall_ms", wall_ms}}
                 .dump()
          << "\n";
      log.flush();
      result.final_loss = loss_value;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
    }

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs || stop) {
      EvalReport rep = evaluate_samples(net, data.samples, data.eval_ids, cfg);
      log << nlohmann::json{{"epoch", epoch}, {"eval", rep.to_json()}}.dump() << "\n";
      log.flush();
      save_checkpoint(result.checkpoint_dir, store, cfg, step, epoch);
      result.final_eval = rep;
    }
  }
  result.steps = step;
  result.epochs = epoch;
  return result;
}

}  // namespace

TrainResult train_run(const RunConfig& cfg_in, const std::string& data_dir,
                      const std::string& out_dir) {
  RunConfig cfg = cfg_in;
  cfg.finalize();
  cfg.validate();
  if (cfg.dtype == "f64") return run_typed<double>(cfg, data_dir, out_dir);
  return run_typed<float>(cfg, data_dir, out_dir);
}

namespace {

template <typename T>
EvalReport eval_typed(const RunConfig& cfg, const std::string& checkpoint_dir,
                      const std::string& data_dir, int fold, bool boundary, double spacing) {
  ParamStore<T> store(cfg.seed);
  CamsNet<T> net(store, cfg.network);
  load_checkpoint(checkpoint_dir, store);

  std::vector<ManifestEntry> entries =
      read_manifest((fs::path(data_dir) / "manifest.jsonl").string());
  EvalAccumulator acc(static_cast<int>(cfg.network.num_classes), spacing, boundary);
  std::int64_t used = 0;
  for (const ManifestEntry& e : entries) {
    if (fold >= 0 && e.fold != fold) continue;
    Sample s = load_sample(data_dir, e);
    std::vector<Sample> one = {s};
    const std::size_t idx[] = {0};
    Tensor<T> img = stack_images<T>(one, idx);
    Tensor<T> probs = net.forward(img, false);
    Tensor<std::uint8_t> pred = argmax_labels(probs);
    acc.add(reshape(pred, {pred.dim(1), pred.dim(2)}), s.label);
    ++used;
  }
  if (used == 0) {
    throw std::runtime_error("eval: no samples in fold " + std::to_string(fold));
  }
  return acc.report();
}

}  // namespace

EvalReport eval_run(const std::string& checkpoint_dir, const std::string& data_dir, int fold,
                    bool boundary, double spacing) {
  RunConfig cfg = checkpoint_config(checkpoint_dir);
  cfg.finalize();
  cfg.validate();
  if (cfg.dtype == "f64") {
    return eval_typed<double>(cfg, checkpoint_dir, data_dir, fold, boundary, spacing);
  }
  return eval_typed<float>(cfg, checkpoint_dir, data_dir, fold, boundary, spacing);
}

template void save_checkpoint<float>(const std::string&, const ParamStore<float>&,
                                     const RunConfig&, std::int64_t, std::int64_t);
template void save_checkpoint<double>(const std::string&, const ParamStore<double>&,
                                      const RunConfig&, std::int64_t, std::int64_t);
template void load_checkpoint<float>(const std::string&, ParamStore<float>&);
template void load_checkpoint<double>(const std::string&, ParamStore<double>&);

}  // namespace cams
