#pragma once

#include <cstdint>
#include <string_view>

namespace cams {

// Deterministic 64-bit random stream (splitmix64). A stream is identified by
// (seed, name); derived streams depend only on those two values, never on
// draw order elsewhere, so module instances reproduce bit-for-bit across
// runs regardless of construction order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::string_view name = {});

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Box-Muller; consumes two uniform draws per call.
  double normal(double mean = 0.0, double stddev = 1.0);
  // Fisher-Yates helper: uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  // Child stream keyed by this stream's identity plus `name`. Must be called
  // before the parent starts drawing if order independence matters.
  RngStream derive(std::string_view name) const;

 private:
  std::uint64_t state_;
};

}  // namespace cams
