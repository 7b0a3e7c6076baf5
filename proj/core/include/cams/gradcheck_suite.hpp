#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cams/gradcheck.hpp"

namespace cams {

struct SuiteEntry {
  std::string name;
  double tol = 0.0;
  GradCheckReport report;
  bool pass() const { return report.pass(tol); }
};

// Finite-difference batteries shared by the CLI and the acceptance suite.
// All run in f64. Ops are checked exhaustively against 1e-6; blocks against
// 1e-4; the tiny full network against 1e-4 with sampled coordinates.
std::vector<SuiteEntry> gradcheck_ops(std::uint64_t seed);
std::vector<SuiteEntry> gradcheck_blocks(std::uint64_t seed);
std::vector<SuiteEntry> gradcheck_network(std::uint64_t seed);

}  // namespace cams
