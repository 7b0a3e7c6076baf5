#include "cams/phantom.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cams/rng.hpp"

namespace cams {

PhantomSpec PhantomSpec::defaults(std::int64_t size, std::uint64_t seed) {
  PhantomSpec spec;
  spec.size = size;
  spec.seed = seed;
  const double anchors[4][2] = {{0.32, 0.32}, {0.68, 0.32}, {0.32, 0.68}, {0.68, 0.68}};
  for (int i = 0; i < 4; ++i) {
    spec.ellipses[i].cx = anchors[i][0];
    spec.ellipses[i].cy = anchors[i][1];
  }
  return spec;
}

void PhantomSpec::validate() const {
  if (size < 8) throw std::invalid_argument("phantom: size must be at least 8");
  for (const auto& e : ellipses) {
    if (e.r_min <= 0.0 || e.r_max < e.r_min) {
      throw std::invalid_argument("phantom: ellipse radii range must be positive, got [" +
                                  std::to_string(e.r_min) + ", " + std::to_string(e.r_max) +
                                  "]");
    }
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("phantom: noise sigma must be >= 0");
}

PhantomSample phantom_raw(const PhantomSpec& spec, std::int64_t index) {
  spec.validate();
  const std::int64_t n = spec.size;
  RngStream rng(spec.seed, "phantom." + std::to_string(index));

  PhantomSample sample;
  sample.image = Tensor<float>::full({1, n, n}, static_cast<float>(spec.bg_intensity));
  sample.label = Tensor<std::uint8_t>::zeros({n, n});
  auto img = sample.image.values();
  auto lbl = sample.label.values();

  for (int k = 0; k < 4; ++k) {
    const EllipseSpec& e = spec.ellipses[static_cast<std::size_t>(k)];
    const double cx = e.cx + rng.uniform(-e.jitter, e.jitter);
    const double cy = e.cy + rng.uniform(-e.jitter, e.jitter);
    const double rx = rng.uniform(e.r_min, e.r_max);
    const double ry = rng.uniform(e.r_min, e.r_max);
    const double rot = rng.uniform(-e.max_rot, e.max_rot);
    const double cos_r = std::cos(rot);
    const double sin_r = std::sin(rot);
    for (std::int64_t y = 0; y < n; ++y) {
      const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(n) - cy;
      for (std::int64_t x = 0; x < n; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(n) - cx;
        const double u = (cos_r * fx + sin_r * fy) / rx;
        const double v = (-sin_r * fx + cos_r * fy) / ry;
        if (u * u + v * v <= 1.0) {
          lbl[y * n + x] = static_cast<std::uint8_t>(k + 1);
          img[y * n + x] = static_cast<float>(spec.fg_intensity[static_cast<std::size_t>(k)]);
        }
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (auto& v : img) v += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
  }
  return sample;
}

PhantomSample generate_phantom(const PhantomSpec& spec, std::int64_t index) {
  PhantomSample sample = phantom_raw(spec, index);
  sample.image = normalize_image(sample.image);
  return sample;
}

Tensor<float> normalize_image(const Tensor<float>& image) {
  auto v = image.values();
  if (v.empty()) throw std::invalid_argument("normalize_image: empty image");
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (float x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double std_dev = std::sqrt(var);
  const double scale = std_dev > 1e-12 ? 1.0 / std_dev : 1.0;
  Tensor<float> out(image.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    o[i] = static_cast<float>((v[i] - mean) * scale);
  }
  return out;
}

}  // namespace cams
