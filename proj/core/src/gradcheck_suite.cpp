#include "cams/gradcheck_suite.hpp"

#include <utility>

#include "cams/aggregators.hpp"
#include "cams/blocks.hpp"
#include "cams/metrics.hpp"
#include "cams/network.hpp"
#include "cams/ops.hpp"
#include "cams/param_store.hpp"
#include "cams/rng.hpp"
#include "cams/ssm.hpp"

namespace cams {

namespace {

using D = Tensor<double>;
using Leaves = std::vector<std::pair<std::string, D>>;

D leaf(RngStream& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  D t = random_uniform<double>(std::move(shape), rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Weighted sum against fixed random weights, so output gradients are
// non-uniform and every coordinate matters. Keyed by salt rather than a live
// stream: gradcheck reruns the forward, which must stay deterministic.
D wsum(const D& t, std::uint64_t salt) {
  RngStream wr(salt, "wsum");
  D w = random_uniform<double>(t.shape(), wr, -1.0, 1.0);
  return sum(mul(t, w));
}

SuiteEntry check(std::string name, double tol, const std::function<D()>& forward,
                 const Leaves& leaves, const GradCheckOpts& opts = {}) {
  SuiteEntry entry;
  entry.name = std::move(name);
  entry.tol = tol;
  entry.report = gradcheck(forward, leaves, opts);
  return entry;
}

Leaves store_leaves(ParamStore<double>& store) {
  Leaves leaves;
  for (const auto& e : store.entries()) leaves.emplace_back(e.name, e.tensor);
  return leaves;
}

}  // namespace

std::vector<SuiteEntry> gradcheck_ops(std::uint64_t seed) {
  constexpr double kTol = 1e-6;
  RngStream rng(seed, "gradcheck.ops");
  std::vector<SuiteEntry> out;

  {
    D a = leaf(rng, {2, 3, 4});
    D b = leaf(rng, {3, 4});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("add_broadcast", kTol, [&] { return wsum(add(a, b), salt); },
                        {{"a", a}, {"b", b}}));
  }
  {
    D a = leaf(rng, {2, 3, 4});
    D b = leaf(rng, {3, 1});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("sub_broadcast", kTol, [&] { return wsum(sub(a, b), salt); },
                        {{"a", a}, {"b", b}}));
  }
  {
    D a = leaf(rng, {2, 3, 4});
    D b = leaf(rng, {4});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("mul_broadcast", kTol, [&] { return wsum(mul(a, b), salt); },
                        {{"a", a}, {"b", b}}));
  }
  {
    D a = leaf(rng, {3, 4});
    D b = leaf(rng, {3, 4}, 0.5, 1.5);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("divide", kTol, [&] { return wsum(divide(a, b), salt); },
                        {{"a", a}, {"b", b}}));
  }
  {
    D x = leaf(rng, {2, 7}, -3.0, 3.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("silu", kTol, [&] { return wsum(silu(x), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 7}, -3.0, 3.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("sigmoid", kTol, [&] { return wsum(sigmoid(x), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 3, 5}, -2.0, 2.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("rms_norm", kTol, [&] { return wsum(rms_norm(x), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 7}, -4.0, 4.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("softplus", kTol, [&] { return wsum(softplus(x), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 7}, -2.0, 2.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("exp", kTol, [&] { return wsum(exp(x), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 5}, -2.0, 2.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("softmax", kTol, [&] { return wsum(softmax(x, 1), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {3, 4, 5}, -2.0, 2.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("softmax_mid_axis", kTol, [&] { return wsum(softmax(x, 1), salt); },
                        {{"x", x}}));
  }
  {
    D a = leaf(rng, {3, 4});
    D b = leaf(rng, {4, 5});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("matmul", kTol, [&] { return wsum(matmul(a, b), salt); },
                        {{"a", a}, {"b", b}}));
  }
  {
    D a = leaf(rng, {2, 3, 4});
    D b = leaf(rng, {4, 5});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("matmul_batched", kTol, [&] { return wsum(matmul(a, b), salt); },
                        {{"a", a}, {"b", b}}));
  }
  {
    D x = leaf(rng, {2, 3, 4});
    D w = leaf(rng, {4, 6});
    D b = leaf(rng, {6});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("linear_bias", kTol, [&] { return wsum(linear(x, w, b), salt); },
                        {{"x", x}, {"w", w}, {"b", b}}));
  }
  {
    D x = leaf(rng, {2, 12});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("reshape", kTol, [&] { return wsum(reshape(x, {2, 3, 4}), salt); },
                        {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 3, 4});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("permute", kTol, [&] { return wsum(permute(x, {2, 0, 1}), salt); },
                        {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 3, 4});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("flip", kTol, [&] { return wsum(flip(x, 1), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 3, 6});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("narrow", kTol, [&] { return wsum(narrow(x, 2, 1, 3), salt); },
                        {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 3, 4});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("sum_axes", kTol, [&] { return wsum(sum(x, {1}), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 3, 4});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("sum_keepdims", kTol, [&] { return wsum(sum(x, {0, 2}, true), salt); },
                        {{"x", x}}));
  }
  {
    D x = leaf(rng, {3, 5});
    out.push_back(check("mean", kTol, [&] { return mean(x); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {1, 2, 4, 6});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("avg_pool2d", kTol, [&] { return wsum(avg_pool2d(x), salt); },
                        {{"x", x}}));
  }
  {
    D x = leaf(rng, {1, 2, 3, 5});
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("bilinear_upsample2d", kTol,
                        [&] { return wsum(bilinear_upsample2d(x), salt); }, {{"x", x}}));
  }
  {
    D x = leaf(rng, {2, 6}, -2.0, 2.0);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("scalar_ops", kTol,
                        [&] { return wsum(neg(add_scalar(mul_scalar(x, 1.7), 0.3)), salt); },
                        {{"x", x}}));
  }
  {
    // Scan with the direct feedthrough; delta kept positive via softplus.
    D u = leaf(rng, {2, 5, 3});
    D d = leaf(rng, {2, 5, 3});
    D bs = leaf(rng, {2, 5, 4});
    D cs = leaf(rng, {2, 5, 4});
    D al = leaf(rng, {3, 4}, -1.0, 0.5);
    D sk = leaf(rng, {3});
    std::uint64_t salt = rng.next_u64();
    auto fwd = [&] {
      return wsum(selective_scan(u, softplus(d), bs, cs, neg(exp(al)), sk), salt);
    };
    out.push_back(check("selective_scan", kTol, fwd,
                        {{"u", u}, {"delta", d}, {"b", bs}, {"c", cs}, {"a_log", al}, {"skip", sk}}));
  }
  {
    D u = leaf(rng, {1, 6, 2});
    D d = leaf(rng, {1, 6, 2});
    D bs = leaf(rng, {1, 6, 3});
    D cs = leaf(rng, {1, 6, 3});
    D al = leaf(rng, {2, 3}, -1.0, 0.5);
    std::uint64_t salt = rng.next_u64();
    auto fwd = [&] {
      return wsum(selective_scan(u, softplus(d), bs, cs, neg(exp(al)), Tensor<double>()), salt);
    };
    out.push_back(check("selective_scan_no_skip", kTol, fwd,
                        {{"u", u}, {"delta", d}, {"b", bs}, {"c", cs}, {"a_log", al}}));
  }
  {
    // Full block input path: projection, split, softplus, then the scan.
    ParamStore<double> store(seed + 17);
    NCMambaConfig cfg = factorized_nc_mamba(3, 3);
    SsmParams<double> p;
    p.d_inner = cfg.d_inner();
    p.d_state = cfg.d_state;
    p.dt_rank = cfg.resolved_dt_rank();
    p.a_log = store.create("a_log", {p.d_inner, p.d_state}, InitRule::a_log_ladder());
    p.skip_d = store.create("skip_d", {p.d_inner}, InitRule::ones());
    p.w_x_proj = store.create("x_proj.w", {p.d_inner, p.dt_rank + 2 * p.d_state},
                              InitRule::kaiming_uniform(p.d_inner));
    p.w_dt_proj = store.create("dt_proj.w", {p.dt_rank, p.d_inner},
                               InitRule::dt_proj_weight(p.dt_rank));
    p.dt_bias = store.create("dt_proj.b", {p.d_inner}, InitRule::dt_bias());
    D u = leaf(rng, {2, 4, 3});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("u", u);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("ssm_forward", kTol, [&] { return wsum(ssm_forward(u, p), salt); },
                        leaves));
  }
  {
    // Dice loss through a softmax head.
    D logits = leaf(rng, {1, 3, 4, 4}, -2.0, 2.0);
    Tensor<std::uint8_t> target({1, 4, 4});
    for (auto& v : target.values()) v = static_cast<std::uint8_t>(rng.next_below(3));
    out.push_back(check("dice_loss", kTol,
                        [&] { return dice_loss(softmax(logits, 1), target); },
                        {{"logits", logits}}));
  }
  return out;
}

std::vector<SuiteEntry> gradcheck_blocks(std::uint64_t seed) {
  constexpr double kTol = 1e-4;
  RngStream rng(seed, "gradcheck.blocks");
  std::vector<SuiteEntry> out;

  {
    NCMambaConfig cfg = reference_nc_mamba(3, 4);
    cfg.d_state = 4;  // small state keeps the exhaustive check quick
    ParamStore<double> store(seed);
    NCMambaBlock<double> block(store, "block", cfg);
    D x = leaf(rng, {1, 4, 3});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("nc_mamba", kTol, [&] { return wsum(block.forward(x), salt); }, leaves));
  }
  {
    ParamStore<double> store(seed + 1);
    NCMambaBlock<double> block(store, "block", factorized_nc_mamba(3, 5));
    D x = leaf(rng, {2, 3, 3});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("factorized", kTol, [&] { return wsum(block.forward(x), salt); },
                        leaves));
  }
  {
    NCMambaConfig cfg = factorized_nc_mamba(4, 4);
    cfg.rms_norm = true;
    ParamStore<double> store(seed + 5);
    NCMambaBlock<double> block(store, "block", cfg);
    D x = leaf(rng, {2, 3, 4});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("nc_mamba_rms", kTol, [&] { return wsum(block.forward(x), salt); },
                        leaves));
  }
  {
    LifmConfig cfg;
    cfg.c_in = 3;
    cfg.c_out = 5;
    cfg.bias = frozen_bias_flags();
    ParamStore<double> store(seed + 2);
    LifmBlock<double> block(store, "lifm", cfg);
    D x = leaf(rng, {1, 4, 3});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("lifm", kTol, [&] { return wsum(block.forward(x), salt); }, leaves));
  }
  {
    AggregatorConfig cfg;
    cfg.kind = AggregatorKind::Channel;
    cfg.c_in = 4;
    cfg.c_out = 6;
    cfg.height = 2;
    cfg.width = 2;
    ParamStore<double> store(seed + 3);
    ChannelAggregator<double> agg(store, "mca", cfg);
    D x = leaf(rng, {1, 4, 2, 2});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("mca", kTol, [&] { return wsum(agg.forward(x), salt); }, leaves));
  }
  {
    AggregatorConfig cfg;
    cfg.kind = AggregatorKind::Spatial;
    cfg.c_in = 4;
    cfg.c_out = 6;
    cfg.height = 2;
    cfg.width = 2;
    ParamStore<double> store(seed + 4);
    SpatialAggregator<double> agg(store, "msa", cfg);
    D x = leaf(rng, {1, 4, 2, 2});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("msa", kTol, [&] { return wsum(agg.forward(x), salt); }, leaves));
  }
  {
    AggregatorConfig cfg;
    cfg.c_in = 3;
    cfg.c_out = 4;
    cfg.height = 2;
    cfg.width = 2;
    ParamStore<double> store(seed + 5);
    CsifModule<double> mod(store, "csif", cfg);
    D x = leaf(rng, {1, 3, 2, 2});
    Leaves leaves = store_leaves(store);
    leaves.emplace_back("input", x);
    std::uint64_t salt = rng.next_u64();
    out.push_back(check("csif", kTol, [&] { return wsum(mod.forward(x, false), salt); }, leaves));
  }
  return out;
}

std::vector<SuiteEntry> gradcheck_network(std::uint64_t seed) {
  constexpr double kTol = 1e-4;
  RngStream rng(seed, "gradcheck.network");
  NetworkConfig cfg = tiny_config();
  cfg.input_h = 16;  // full-resolution patches shrink the bottleneck to a 1x1 sequence
  cfg.input_w = 16;
  cfg.patch_size = 1;
  ParamStore<double> store(seed);
  CamsNet<double> net(store, cfg);
  D x = leaf(rng, {1, 1, cfg.input_h, cfg.input_w});
  Leaves leaves = store_leaves(store);
  leaves.emplace_back("input", x);

  GradCheckOpts opts;
  opts.max_coords_per_leaf = 1;  // one probe per tensor keeps this under a minute
  opts.sample_seed = seed ^ 0x9e3779b97f4a7c15ull;
  std::uint64_t salt = rng.next_u64();
  std::vector<SuiteEntry> out;
  out.push_back(check("network_tiny", kTol, [&] { return wsum(net.forward(x, false), salt); },
                      leaves, opts));
  return out;
}

}  // namespace cams
