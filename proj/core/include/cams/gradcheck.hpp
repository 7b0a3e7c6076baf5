#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cams/tensor.hpp"

namespace cams {

struct GradCheckOpts {
  double step = 1e-5;  // central difference half-width
  // 0 checks every coordinate; otherwise at most this many random
  // coordinates per leaf tensor.
  std::int64_t max_coords_per_leaf = 0;
  std::uint64_t sample_seed = 0x5eed;
};

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t coords_checked = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckGroup> groups;
  bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares reverse-mode gradients of `forward` against central finite
// differences, leaf by leaf. `forward` must be deterministic and re-runnable:
// it is evaluated once under a fresh tape for the analytic gradients and then
// repeatedly, without a tape, at perturbed leaf values. Relative error is
// |a - n| / max(1, |a|, |n|).
GradCheckReport gradcheck(const std::function<Tensor<double>()>& forward,
                          const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                          const GradCheckOpts& opts = {});

}  // namespace cams
