#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cams/phantom.hpp"
#include "cams/rng.hpp"
#include "cams/tensor.hpp"

namespace cams {

// One line of manifest.jsonl: {"id": .., "image": .., "label": .., "fold": ..}
// with paths relative to the manifest's directory.
struct ManifestEntry {
  std::int64_t id = 0;
  std::string image;
  std::string label;
  int fold = 0;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, std::span<const ManifestEntry> entries);

struct Sample {
  std::int64_t id = 0;
  Tensor<float> image;         // [1, H, W], normalized at load time
  Tensor<std::uint8_t> label;  // [H, W]
};

// Reads the entry's CTF pair from data_dir, validates shapes agree, and
// normalizes the image to mean 0 / stddev 1.
Sample load_sample(const std::string& data_dir, const ManifestEntry& entry);

// Exact geometric transforms over the trailing two (H, W) axes.
template <typename T>
Tensor<T> flip_h(const Tensor<T>& t);
template <typename T>
Tensor<T> flip_v(const Tensor<T>& t);
template <typename T>
Tensor<T> rot90(const Tensor<T>& t, int quarter_turns);  // requires H == W

struct AugmentFlags {
  bool hflip = false;
  bool vflip = false;
  bool rot90 = false;
  double noise_sigma = 0.0;
};

// Each enabled geometric op fires with probability 1/2 (rot90 then draws its
// turn count); image and label transform identically. Noise touches only the
// image. Deterministic given the stream state.
Sample augment(const Sample& sample, RngStream& rng, const AugmentFlags& flags);

// Writes `count` phantom pairs (img_NNNN.ctf raw f32, lbl_NNNN.ctf u8) plus
// manifest.jsonl into out_dir. Fold = index mod 5. Returns the entries.
std::vector<ManifestEntry> synthesize_dataset(const PhantomSpec& spec, std::int64_t count,
                                              const std::string& out_dir);

}  // namespace cams
