#include "cams/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cams/rng.hpp"

namespace cams {

GradCheckReport gradcheck(const std::function<Tensor<double>()>& forward,
                          const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                          const GradCheckOpts& opts) {
  for (const auto& [name, leaf] : leaves) {
    if (!leaf.requires_grad()) {
      throw std::invalid_argument("gradcheck: leaf '" + name + "' does not require grad");
    }
    Tensor<double>(leaf).zero_grad();
  }

  std::vector<std::vector<double>> analytic(leaves.size());
  {
    Tape<double> tape;
    Tensor<double> loss = forward();
    tape.backward(loss);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const Tensor<double>& leaf = leaves[li].second;
      if (leaf.has_grad()) {
        analytic[li].assign(leaf.grad().begin(), leaf.grad().end());
      } else {
        analytic[li].assign(static_cast<std::size_t>(leaf.numel()), 0.0);
      }
    }
  }

  GradCheckReport report;
  RngStream pick(opts.sample_seed, "gradcheck");
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const auto& [name, leaf] = leaves[li];
    auto vals = Tensor<double>(leaf).values();
    const std::int64_t n = static_cast<std::int64_t>(vals.size());

    std::vector<std::int64_t> coords;
    if (opts.max_coords_per_leaf > 0 && n > opts.max_coords_per_leaf) {
      // Sample without replacement via partial Fisher-Yates.
      std::vector<std::int64_t> all(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      for (std::int64_t i = 0; i < opts.max_coords_per_leaf; ++i) {
        const auto j = i + static_cast<std::int64_t>(
                               pick.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
      }
      coords.assign(all.begin(), all.begin() + opts.max_coords_per_leaf);
    } else {
      coords.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    }

    GradCheckGroup group{name, 0.0, static_cast<std::int64_t>(coords.size())};
    for (std::int64_t c : coords) {
      const auto ci = static_cast<std::size_t>(c);
      const double saved = vals[ci];
      vals[ci] = saved + opts.step;
      const double up = forward().item();
      vals[ci] = saved - opts.step;
      const double down = forward().item();
      vals[ci] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[li][ci];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      group.max_rel_err = std::max(group.max_rel_err, std::abs(a - numeric) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace cams
