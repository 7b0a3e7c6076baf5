#include "cams/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "cams/ctf.hpp"
#include "cams/ops.hpp"

#include "json.hpp"

namespace cams {

namespace fs = std::filesystem;

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("manifest: " + path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    ManifestEntry e;
    try {
      e.id = j.at("id").get<std::int64_t>();
      e.image = j.at("image").get<std::string>();
      e.label = j.at("label").get<std::string>();
      e.fold = j.at("fold").get<int>();
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error("manifest: " + path + ":" + std::to_string(line_no) + ": " +
                               ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
  for (const ManifestEntry& e : entries) {
    nlohmann::json j = {{"id", e.id}, {"image", e.image}, {"label", e.label}, {"fold", e.fold}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("manifest: write failure on " + path);
}

Sample load_sample(const std::string& data_dir, const ManifestEntry& entry) {
  Sample s;
  s.id = entry.id;
  const fs::path dir(data_dir);
  Tensor<float> raw = ctf_read<float>((dir / entry.image).string());
  s.label = ctf_read<std::uint8_t>((dir / entry.label).string());
  if (raw.ndim() != 3 || raw.dim(0) != 1) {
    throw std::runtime_error("dataset: image " + entry.image + " must be [1, H, W], got " +
                             shape_str(raw.shape()));
  }
  if (s.label.ndim() != 2 || s.label.dim(0) != raw.dim(1) || s.label.dim(1) != raw.dim(2)) {
    throw std::runtime_error("dataset: label " + entry.label + " shape " +
                             shape_str(s.label.shape()) + " does not match image " +
                             shape_str(raw.shape()));
  }
  s.image = normalize_image(raw);
  return s;
}

template <typename T>
Tensor<T> flip_h(const Tensor<T>& t) {
  return flip(t, t.ndim() - 1);
}

template <typename T>
Tensor<T> flip_v(const Tensor<T>& t) {
  return flip(t, t.ndim() - 2);
}

template <typename T>
Tensor<T> rot90(const Tensor<T>& t, int quarter_turns) {
  const int nd = t.ndim();
  if (nd < 2 || t.dim(nd - 2) != t.dim(nd - 1)) {
    throw std::invalid_argument("rot90: trailing axes must be square, got " +
                                shape_str(t.shape()));
  }
  int k = ((quarter_turns % 4) + 4) % 4;
  Tensor<T> out = t;
  std::vector<int> swap_hw(static_cast<std::size_t>(nd));
  for (int i = 0; i < nd - 2; ++i) swap_hw[static_cast<std::size_t>(i)] = i;
  swap_hw[static_cast<std::size_t>(nd - 2)] = nd - 1;
  swap_hw[static_cast<std::size_t>(nd - 1)] = nd - 2;
  for (int i = 0; i < k; ++i) {
    out = flip_v(permute(out, swap_hw));  // one counter-clockwise quarter turn
  }
  return out;
}

Sample augment(const Sample& sample, RngStream& rng, const AugmentFlags& flags) {
  Sample out = sample;
  if (flags.hflip && rng.uniform() < 0.5) {
    out.image = flip_h(out.image);
    out.label = flip_h(out.label);
  }
  if (flags.vflip && rng.uniform() < 0.5) {
    out.image = flip_v(out.image);
    out.label = flip_v(out.label);
  }
  if (flags.rot90 && rng.uniform() < 0.5) {
    const int k = static_cast<int>(rng.next_below(4));
    out.image = rot90(out.image, k);
    out.label = rot90(out.label, k);
  }
  if (flags.noise_sigma > 0.0) {
    Tensor<float> noisy = out.image.clone();
    for (auto& v : noisy.values()) {
      v += static_cast<float>(rng.normal(0.0, flags.noise_sigma));
    }
    out.image = noisy;
  }
  return out;
}

std::vector<ManifestEntry> synthesize_dataset(const PhantomSpec& spec, std::int64_t count,
                                              const std::string& out_dir) {
  if (count < 1) throw std::invalid_argument("synthesize_dataset: count must be >= 1");
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  entries.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    PhantomSample sample = phantom_raw(spec, i);
    std::ostringstream stem;
    stem << std::setw(4) << std::setfill('0') << i;
    ManifestEntry e;
    e.id = i;
    e.image = "img_" + stem.str() + ".ctf";
    e.label = "lbl_" + stem.str() + ".ctf";
    e.fold = static_cast<int>(i % 5);
    ctf_write((dir / e.image).string(), sample.image);
    ctf_write((dir / e.label).string(), sample.label);
    entries.push_back(std::move(e));
  }
  write_manifest((dir / "manifest.jsonl").string(), entries);
  return entries;
}

template Tensor<float> flip_h(const Tensor<float>&);
template Tensor<double> flip_h(const Tensor<double>&);
template Tensor<std::uint8_t> flip_h(const Tensor<std::uint8_t>&);
template Tensor<float> flip_v(const Tensor<float>&);
template Tensor<double> flip_v(const Tensor<double>&);
template Tensor<std::uint8_t> flip_v(const Tensor<std::uint8_t>&);
template Tensor<float> rot90(const Tensor<float>&, int);
template Tensor<double> rot90(const Tensor<double>&, int);
template Tensor<std::uint8_t> rot90(const Tensor<std::uint8_t>&, int);

}  // namespace cams
