#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cams/blocks.hpp"
#include "cams/dataset.hpp"
#include "cams/gradcheck_suite.hpp"
#include "cams/network.hpp"
#include "cams/ops.hpp"
#include "cams/phantom.hpp"
#include "cams/ssm.hpp"
#include "cams/train.hpp"

using nlohmann::json;
using namespace cams;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("CAMS_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  std::string s(v);
  if (s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("CAMS_SEED: expected an unsigned integer, got '" + s + "'");
  }
  return std::stoull(s);
}

json parse_override_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (!v.is_discarded()) return v;
  return json(text);  // bare words become strings
}

void set_by_path(json& root, const std::string& dotted, json value) {
  json* cur = &root;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = dotted.find('.', start);
    std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) {
      throw std::invalid_argument("override --" + dotted + ": empty path segment");
    }
    if (dot == std::string::npos) {
      (*cur)[key] = std::move(value);
      return;
    }
    cur = &(*cur)[key];
    if (!cur->is_object() && !cur->is_null()) {
      throw std::invalid_argument("override --" + dotted + ": '" + key +
                                  "' is not a JSON object");
    }
    start = dot + 1;
  }
}

void apply_overrides(json& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& flag = extras[i];
    if (flag.rfind("--", 0) != 0 || flag.size() <= 2) {
      throw std::invalid_argument("unexpected argument '" + flag +
                                  "' (overrides look like --key value)");
    }
    if (i + 1 >= extras.size()) {
      throw std::invalid_argument("override " + flag + " is missing a value");
    }
    set_by_path(cfg, flag.substr(2), parse_override_value(extras[++i]));
  }
}

// ---- train ----------------------------------------------------------------

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::vector<std::string>& extras) {
  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config " + config_path);
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw std::runtime_error(config_path + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error(config_path + ": run config must be an object");
  }
  if (!j.contains("seed")) {
    if (auto s = env_seed()) j["seed"] = *s;
  }
  apply_overrides(j, extras);  // flags win over file and environment

  RunConfig cfg = RunConfig::from_json(j);
  TrainResult res = train_run(cfg, data_dir, out_dir);

  std::cout << "steps " << res.steps << ", epochs " << res.epochs << ", final loss "
            << res.final_loss << "\n";
  std::cout << "checkpoint: " << res.checkpoint_dir << "\n";
  std::cout << "log:        " << res.log_path << "\n";
  std::cout << res.final_eval.table();
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

int run_eval(const std::string& checkpoint, const std::string& data_dir, int fold, bool boundary,
             double spacing) {
  EvalReport rep = eval_run(checkpoint, data_dir, fold, boundary, spacing);
  std::cout << rep.table();
  std::cout << rep.to_json().dump() << "\n";
  return kExitOk;
}

// ---- count-params ---------------------------------------------------------

void print_count_table(const std::string& title, const CountTable& table) {
  std::cout << title << "\n";
  for (const auto& row : table.rows) {
    std::printf("  %-22s %-12s %8lld\n", row.name.c_str(), shape_str(row.shape).c_str(),
                static_cast<long long>(row.count));
  }
  std::printf("  %-22s %-12s %8lld\n", "total", "", static_cast<long long>(table.total));
}

struct TargetCheck {
  std::string name;
  std::int64_t counted = 0;
  std::int64_t target = 0;
  bool pass() const {
    return std::abs(static_cast<double>(counted - target)) <= 0.03 * static_cast<double>(target);
  }
  double rel_err() const {
    return std::abs(static_cast<double>(counted - target)) / static_cast<double>(target);
  }
};

json check_json(const TargetCheck& c) {
  return json{{"name", c.name},
              {"counted", c.counted},
              {"target", c.target},
              {"residual", c.counted - c.target},
              {"rel_err", c.rel_err()},
              {"pass", c.pass()}};
}

bool print_check(const TargetCheck& c) {
  std::printf("  target %lld, counted %lld, residual %+lld (%.3f%%): %s\n",
              static_cast<long long>(c.target), static_cast<long long>(c.counted),
              static_cast<long long>(c.counted - c.target), 100.0 * c.rel_err(),
              c.pass() ? "PASS" : "FAIL");
  return c.pass();
}

int run_count_params(const std::string& reference, bool full, std::int64_t input) {
  const BiasFlags flags = frozen_bias_flags();
  const bool skip = frozen_use_skip_d();
  bool all_pass = true;
  json out;

  auto nc_cfg = reference_nc_mamba(32, 64);
  nc_cfg.bias = flags;
  nc_cfg.use_skip_d = skip;
  auto fac_cfg = factorized_nc_mamba(32, 64);
  fac_cfg.bias = flags;
  fac_cfg.use_skip_d = skip;
  LifmConfig lifm_cfg;
  lifm_cfg.c_in = 32;
  lifm_cfg.c_out = 64;
  lifm_cfg.bias = flags;
  lifm_cfg.use_skip_d = skip;

  if (reference.empty() || reference == "nc-mamba") {
    CountTable t = nc_mamba_count(nc_cfg);
    print_count_table("nc-mamba 32->64 (E=2, D=16)", t);
    TargetCheck c{"nc-mamba", t.total, 11776};
    all_pass = print_check(c) && all_pass;
    out["nc_mamba"] = check_json(c);
  }
  if (reference.empty() || reference == "factorized") {
    CountTable t = nc_mamba_count(fac_cfg);
    print_count_table("factorized 32->64 (E=1, D=2)", t);
    TargetCheck c{"factorized", t.total, 4608};
    all_pass = print_check(c) && all_pass;
    out["factorized"] = check_json(c);
  }
  if (reference.empty() || reference == "lifm") {
    CountTable t = lifm_count(lifm_cfg);
    print_count_table("lifm 32->32->64", t);
    TargetCheck c{"lifm", t.total, 9184};
    all_pass = print_check(c) && all_pass;
    out["lifm"] = check_json(c);
  }

  if (full) {
    NetworkConfig net = paper_config(input);
    ParamReport rep = network_param_report(net);
    std::cout << "full network, " << input << "x" << input << " input\n";
    for (const auto& row : rep.rows) {
      std::printf("  %-12s %12lld\n", row.stage.c_str(), static_cast<long long>(row.count));
    }
    std::printf("  %-12s %12lld\n", "total", static_cast<long long>(rep.total));
    const double target = 18.56e6;
    const double rel = std::abs(static_cast<double>(rep.total) - target) / target;
    const bool pass = rel <= 0.05;
    std::printf("  target 18.56M +-5%%, counted %.2fM (%.1f%% off): %s\n", rep.total / 1e6,
                100.0 * rel, pass ? "PASS" : "FAIL");
    all_pass = pass && all_pass;
    out["full"] = json{{"input", input},
                       {"counted", rep.total},
                       {"target", 18560000},
                       {"rel_err", rel},
                       {"pass", pass}};
  }

  std::cout << out.dump() << "\n";
  return all_pass ? kExitOk : kExitCheckFailed;
}

// ---- gradcheck ------------------------------------------------------------

int run_gradcheck(const std::string& scope, const std::string& name_filter, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::vector<SuiteEntry>>> batteries;
  if (scope == "op" || scope == "all") batteries.emplace_back("op", gradcheck_ops(seed));
  if (scope == "block" || scope == "all") batteries.emplace_back("block", gradcheck_blocks(seed));
  if (scope == "network" || scope == "all") {
    batteries.emplace_back("network", gradcheck_network(seed));
  }

  int shown = 0;
  int failures = 0;
  for (const auto& [battery, entries] : batteries) {
    for (const auto& e : entries) {
      if (!name_filter.empty() && e.name.find(name_filter) == std::string::npos) continue;
      ++shown;
      if (!e.pass()) ++failures;
      std::printf("%-8s %-22s max_rel_err %.3e tol %.0e %s\n", battery.c_str(), e.name.c_str(),
                  e.report.max_rel_err, e.tol, e.pass() ? "ok" : "FAIL");
    }
  }
  if (shown == 0) {
    throw std::invalid_argument("gradcheck: no entry matches --name " + name_filter);
  }
  std::printf("%d checked, %d failed\n", shown, failures);
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

// ---- bench-scan -----------------------------------------------------------

int run_bench_scan(std::vector<std::int64_t> lengths, int repeats, std::uint64_t seed) {
  if (lengths.empty()) throw std::invalid_argument("bench-scan: --lengths is empty");
  if (!std::is_sorted(lengths.begin(), lengths.end()) ||
      std::adjacent_find(lengths.begin(), lengths.end()) != lengths.end()) {
    throw std::invalid_argument("bench-scan: lengths must be strictly ascending");
  }
  if (lengths.front() < 1) throw std::invalid_argument("bench-scan: lengths must be positive");
  if (repeats < 1) throw std::invalid_argument("bench-scan: repeats must be >= 1");

  constexpr std::int64_t kInner = 32;
  constexpr std::int64_t kState = 16;
  RngStream rng(seed, "bench.scan");

  std::printf("length,mean_ms,std_ms,median_ms\n");
  std::vector<double> log_l, log_t;
  for (std::int64_t len : lengths) {
    auto u = random_uniform<float>({1, len, kInner}, rng);
    auto delta = random_uniform<float>({1, len, kInner}, rng, 0.001f, 0.1f);
    auto bs = random_uniform<float>({1, len, kState}, rng);
    auto cs = random_uniform<float>({1, len, kState}, rng);
    auto a = random_uniform<float>({kInner, kState}, rng, -1.0f, -0.1f);
    auto skip = random_uniform<float>({kInner}, rng);

    selective_scan(u, delta, bs, cs, a, skip);  // warmup
    std::vector<double> ms(static_cast<std::size_t>(repeats));
    for (auto& sample : ms) {
      auto t0 = std::chrono::steady_clock::now();
      selective_scan(u, delta, bs, cs, a, skip);
      auto t1 = std::chrono::steady_clock::now();
      sample = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    double mean = 0;
    for (double v : ms) mean += v;
    mean /= static_cast<double>(ms.size());
    double var = 0;
    for (double v : ms) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ms.size());
    std::sort(ms.begin(), ms.end());
    const double median = ms.size() % 2 == 1
                              ? ms[ms.size() / 2]
                              : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
    std::printf("%lld,%.4f,%.4f,%.4f\n", static_cast<long long>(len), mean, std::sqrt(var),
                median);
    log_l.push_back(std::log(static_cast<double>(len)));
    log_t.push_back(std::log(median));
  }

  double slope = 0.0;
  if (log_l.size() >= 2) {
    const auto n = static_cast<double>(log_l.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_l.size(); ++i) {
      sx += log_l[i];
      sy += log_t[i];
      sxx += log_l[i] * log_l[i];
      sxy += log_l[i] * log_t[i];
    }
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  std::printf("# log-log slope %.3f\n", slope);
  return kExitOk;
}

// ---- synth-data -----------------------------------------------------------

int run_synth_data(const std::string& out_dir, std::int64_t count, std::int64_t size,
                   std::uint64_t seed) {
  PhantomSpec spec = PhantomSpec::defaults(size, seed);
  auto entries = synthesize_dataset(spec, count, out_dir);
  std::cout << "wrote " << entries.size() << " samples (" << 2 * entries.size()
            << " tensor files) to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cams: Mamba-based U-shaped segmentation on a minimal autodiff core"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON run config");
  std::string train_config, train_data, train_out;
  train_cmd->add_option("--config", train_config, "run config JSON (defaults when omitted)");
  train_cmd->add_option("--data", train_data, "dataset directory with manifest.jsonl")
      ->required();
  train_cmd->add_option("--out", train_out, "output directory for logs and checkpoints")
      ->required();
  train_cmd->allow_extras();  // --key value config overrides

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one fold");
  std::string eval_checkpoint, eval_data;
  int eval_fold = -1;
  bool eval_boundary = false;
  double eval_spacing = 1.0;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--fold", eval_fold, "fold to evaluate; -1 = all samples");
  eval_cmd->add_flag("--boundary", eval_boundary, "Hausdorff over boundary pixels only");
  eval_cmd->add_option("--spacing", eval_spacing, "pixel spacing for Hausdorff distances");

  auto* count_cmd = app.add_subcommand("count-params", "parameter accounting and target checks");
  std::string count_reference;
  bool count_full = false;
  std::int64_t count_input = 256;
  count_cmd->add_option("--reference", count_reference, "one reference block only")
      ->check(CLI::IsMember({"nc-mamba", "factorized", "lifm"}));
  count_cmd->add_flag("--full", count_full, "also count the full paper configuration");
  count_cmd->add_option("--input", count_input, "square input size for --full")
      ->check(CLI::PositiveNumber);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks (f64)");
  std::string grad_scope = "all";
  std::string grad_name;
  std::uint64_t grad_seed = 0;
  grad_cmd->add_option("--scope", grad_scope, "op | block | network | all")
      ->check(CLI::IsMember({"op", "block", "network", "all"}));
  grad_cmd->add_option("--name", grad_name, "substring filter on entry names");
  auto* grad_seed_opt = grad_cmd->add_option("--seed", grad_seed,
                                             "rng seed (falls back to CAMS_SEED)");

  auto* bench_cmd = app.add_subcommand("bench-scan", "selective-scan timing vs sequence length");
  std::vector<std::int64_t> bench_lengths = {1024, 2048, 4096, 8192};
  int bench_repeats = 5;
  std::uint64_t bench_seed = 0;
  bench_cmd->add_option("--lengths", bench_lengths, "ascending sequence lengths")
      ->delimiter(',');
  bench_cmd->add_option("--repeats", bench_repeats, "timed repeats per length");
  auto* bench_seed_opt = bench_cmd->add_option("--seed", bench_seed,
                                               "rng seed (falls back to CAMS_SEED)");

  auto* synth_cmd = app.add_subcommand("synth-data", "generate a phantom dataset + manifest");
  std::string synth_out;
  std::int64_t synth_count = 10;
  std::int64_t synth_size = 64;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--count", synth_count, "number of samples")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", synth_size, "square image size")->check(CLI::PositiveNumber);
  auto* synth_seed_opt = synth_cmd->add_option("--seed", synth_seed,
                                               "rng seed (falls back to CAMS_SEED)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto seed_or = [&](const CLI::Option* opt, std::uint64_t value) {
      if (opt->count() > 0) return value;
      if (auto s = env_seed()) return *s;
      return std::uint64_t{0};
    };
    if (*train_cmd) return run_train(train_config, train_data, train_out, train_cmd->remaining());
    if (*eval_cmd) return run_eval(eval_checkpoint, eval_data, eval_fold, eval_boundary,
                                   eval_spacing);
    if (*count_cmd) return run_count_params(count_reference, count_full, count_input);
    if (*grad_cmd) return run_gradcheck(grad_scope, grad_name, seed_or(grad_seed_opt, grad_seed));
    if (*bench_cmd) {
      return run_bench_scan(bench_lengths, bench_repeats, seed_or(bench_seed_opt, bench_seed));
    }
    if (*synth_cmd) {
      return run_synth_data(synth_out, synth_count, synth_size,
                            seed_or(synth_seed_opt, synth_seed));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
