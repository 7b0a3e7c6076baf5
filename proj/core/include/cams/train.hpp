#pragma once

#include <cstdint>
#include <string>

#include "cams/dataset.hpp"
#include "cams/metrics.hpp"
#include "cams/network.hpp"

#include "json.hpp"

namespace cams {

// Full recipe for one training run. The ablation switches are applied onto
// the network config by finalize(), so a run is described by one JSON file.
struct RunConfig {
  NetworkConfig network = desk_config();
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.55;
  double weight_decay = 0.01;
  std::int64_t halve_every = 100;  // epochs between lr halvings
  std::int64_t epochs = 50;
  std::int64_t batch_size = 2;
  std::int64_t max_steps = 0;  // 0 = no cap
  std::int64_t eval_every = 10;  // epochs between eval + checkpoint
  std::uint64_t seed = 0;
  std::string dtype = "f32";  // f32 | f64
  int val_fold = -1;  // -1 trains on every sample and evaluates on them
  bool loss_include_background = true;
  double hd_spacing = 1.0;
  AugmentFlags augment;

  // Ablation axes; finalize() folds them into `network`.
  bool msa_on = true;
  bool bidirectional = true;
  bool share_weights = true;
  bool pos_embed = true;

  void finalize();
  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

// lr(epoch) = lr0 * 0.5^floor(epoch / halve_every)
double lr_for_epoch(double lr0, std::int64_t halve_every, std::int64_t epoch);

struct TrainResult {
  std::int64_t steps = 0;
  std::int64_t epochs = 0;
  double final_loss = 0.0;
  EvalReport final_eval;  // on the training samples (val fold when set)
  std::string checkpoint_dir;
  std::string log_path;
};

// Runs the full loop: per-step JSONL log lines {step, epoch, lr, loss,
// wall_ms}, eval + checkpoint every eval_every epochs and at the end.
TrainResult train_run(const RunConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir);

// Re-evaluates a checkpoint over the samples of one fold (-1 = all).
EvalReport eval_run(const std::string& checkpoint_dir, const std::string& data_dir, int fold,
                    bool boundary = false, double spacing = 1.0);

// Checkpoint directory: config.json, state.json (step/epoch + the parameter
// names and shapes in store order) and params.ctf (flat concatenation).
template <typename T>
void save_checkpoint(const std::string& dir, const ParamStore<T>& store, const RunConfig& cfg,
                     std::int64_t step, std::int64_t epoch);
template <typename T>
void load_checkpoint(const std::string& dir, ParamStore<T>& store);

RunConfig checkpoint_config(const std::string& dir);

}  // namespace cams
