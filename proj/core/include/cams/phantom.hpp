#pragma once

#include <array>
#include <cstdint>

#include "cams/tensor.hpp"

namespace cams {

// One ellipse in fractional image coordinates: anchored center with uniform
// jitter, radii and rotation drawn per sample.
struct EllipseSpec {
  double cx = 0.5;
  double cy = 0.5;
  double jitter = 0.05;
  double r_min = 0.14;
  double r_max = 0.24;
  double max_rot = 0.8;  // radians, rotation ~ U(-max_rot, max_rot)
};

// Synthetic cardiac-style phantom: four quadrant-anchored ellipses for
// classes 1..4 painted in that z-order (later classes overwrite earlier ones
// where they overlap), distinct region intensities, Gaussian pixel noise.
struct PhantomSpec {
  std::int64_t size = 64;
  std::uint64_t seed = 0;
  std::array<EllipseSpec, 4> ellipses;
  double bg_intensity = 0.15;
  std::array<double, 4> fg_intensity = {0.35, 0.55, 0.75, 0.95};
  double noise_sigma = 0.04;

  static PhantomSpec defaults(std::int64_t size, std::uint64_t seed);
  void validate() const;
};

struct PhantomSample {
  Tensor<float> image;        // [1, H, W]
  Tensor<std::uint8_t> label;  // [H, W], values 0..4
};

// Raw (unnormalized) intensities. Deterministic per (spec.seed, index).
PhantomSample phantom_raw(const PhantomSpec& spec, std::int64_t index);

// Raw sample with the image normalized to mean 0, stddev 1.
PhantomSample generate_phantom(const PhantomSpec& spec, std::int64_t index);

// Per-image normalization: subtract the mean, divide by the population
// stddev (guarded against zero spread).
Tensor<float> normalize_image(const Tensor<float>& image);

}  // namespace cams
