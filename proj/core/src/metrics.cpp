#include "cams/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cams/ops.hpp"

namespace cams {

namespace {

void check_label_pair(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt,
                      const char* op) {
  if (pred.ndim() != 2 || gt.ndim() != 2 || pred.shape() != gt.shape()) {
    throw std::invalid_argument(std::string(op) + ": label maps must share one [H, W] shape, got " +
                                shape_str(pred.shape()) + " vs " + shape_str(gt.shape()));
  }
}

// Felzenszwalb-Huttenlocher 1-D squared distance transform.
void edt_1d(const std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

// Squared Euclidean distance to the nearest set pixel, for every pixel.
std::vector<double> squared_edt(const std::vector<std::uint8_t>& mask, std::int64_t h,
                                std::int64_t w) {
  constexpr double kFar = 1e18;
  std::vector<double> dist(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) dist[i] = mask[i] ? 0.0 : kFar;

  const std::int64_t n = std::max(h, w);
  std::vector<double> f(n), out(n), z(n + 1);
  std::vector<int> v(n);
  for (std::int64_t x = 0; x < w; ++x) {
    for (std::int64_t y = 0; y < h; ++y) f[y] = dist[y * w + x];
    f.resize(h);
    out.resize(h);
    edt_1d(f, out, v, z);
    for (std::int64_t y = 0; y < h; ++y) dist[y * w + x] = out[y];
    f.resize(n);
    out.resize(n);
  }
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) f[x] = dist[y * w + x];
    f.resize(w);
    out.resize(w);
    edt_1d(f, out, v, z);
    for (std::int64_t x = 0; x < w; ++x) dist[y * w + x] = out[x];
    f.resize(n);
    out.resize(n);
  }
  return dist;
}

std::vector<std::uint8_t> class_mask(const Tensor<std::uint8_t>& labels, int cls) {
  auto v = labels.values();
  std::vector<std::uint8_t> mask(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mask[i] = v[i] == cls ? 1 : 0;
  return mask;
}

// Keeps only pixels with a 4-neighbor outside the set (image edges count).
std::vector<std::uint8_t> boundary_of(const std::vector<std::uint8_t>& mask, std::int64_t h,
                                      std::int64_t w) {
  std::vector<std::uint8_t> edge(mask.size(), 0);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      if (!mask[y * w + x]) continue;
      const bool interior = y > 0 && mask[(y - 1) * w + x] && y + 1 < h &&
                            mask[(y + 1) * w + x] && x > 0 && mask[y * w + x - 1] &&
                            x + 1 < w && mask[y * w + x + 1];
      edge[y * w + x] = interior ? 0 : 1;
    }
  }
  return edge;
}

double directed_hd_sq(const std::vector<std::uint8_t>& from, const std::vector<double>& edt_to) {
  double worst = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]) worst = std::max(worst, edt_to[i]);
  }
  return worst;
}

}  // namespace

template <typename T>
Tensor<T> dice_loss(const Tensor<T>& probs, const Tensor<std::uint8_t>& target, double eps,
                    bool include_background) {
  if (probs.ndim() != 4) {
    throw std::invalid_argument("dice_loss: probs must be [batch, classes, H, W], got " +
                                shape_str(probs.shape()));
  }
  if (target.ndim() != 3 || target.dim(0) != probs.dim(0) || target.dim(1) != probs.dim(2) ||
      target.dim(2) != probs.dim(3)) {
    throw std::invalid_argument("dice_loss: target must be [batch, H, W] matching probs, got " +
                                shape_str(target.shape()));
  }
  Tensor<T> t = one_hot<T>(target, probs.dim(1));
  Tensor<T> inter = sum(mul(probs, t), {2, 3});
  Tensor<T> denom = add(sum(probs, {2, 3}), sum(t, {2, 3}));
  Tensor<T> per_class = divide(add_scalar(mul_scalar(inter, T(2)), static_cast<T>(eps)),
                               add_scalar(denom, static_cast<T>(eps)));
  if (!include_background) {
    if (probs.dim(1) < 2) {
      throw std::invalid_argument("dice_loss: excluding background needs at least 2 classes");
    }
    per_class = narrow(per_class, 1, 1, probs.dim(1) - 1);
  }
  return sub(Tensor<T>::scalar(T(1)), mean(per_class));
}

double dice_score(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt, int cls) {
  check_label_pair(pred, gt, "dice_score");
  auto pv = pred.values();
  auto gv = gt.values();
  std::int64_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const bool in_p = pv[i] == cls;
    const bool in_g = gv[i] == cls;
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::optional<double> hausdorff(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt,
                                int cls, double spacing, bool boundary) {
  check_label_pair(pred, gt, "hausdorff");
  const std::int64_t h = pred.dim(0);
  const std::int64_t w = pred.dim(1);
  std::vector<std::uint8_t> p = class_mask(pred, cls);
  std::vector<std::uint8_t> g = class_mask(gt, cls);
  if (boundary) {
    p = boundary_of(p, h, w);
    g = boundary_of(g, h, w);
  }
  const bool p_empty = std::find(p.begin(), p.end(), 1) == p.end();
  const bool g_empty = std::find(g.begin(), g.end(), 1) == g.end();
  if (p_empty || g_empty) return std::nullopt;
  const std::vector<double> edt_p = squared_edt(p, h, w);
  const std::vector<double> edt_g = squared_edt(g, h, w);
  const double worst = std::max(directed_hd_sq(p, edt_g), directed_hd_sq(g, edt_p));
  return std::sqrt(worst) * spacing;
}

template <typename T>
Tensor<std::uint8_t> argmax_labels(const Tensor<T>& probs) {
  if (probs.ndim() != 4) {
    throw std::invalid_argument("argmax_labels: expected [batch, classes, H, W], got " +
                                shape_str(probs.shape()));
  }
  const std::int64_t b = probs.dim(0), k = probs.dim(1), hw = probs.dim(2) * probs.dim(3);
  Tensor<std::uint8_t> out({probs.dim(0), probs.dim(2), probs.dim(3)});
  auto pv = probs.values();
  auto ov = out.values();
  for (std::int64_t i = 0; i < b; ++i) {
    for (std::int64_t pix = 0; pix < hw; ++pix) {
      T best = pv[(i * k) * hw + pix];
      std::uint8_t arg = 0;
      for (std::int64_t c = 1; c < k; ++c) {
        const T val = pv[(i * k + c) * hw + pix];
        if (val > best) {
          best = val;
          arg = static_cast<std::uint8_t>(c);
        }
      }
      ov[i * hw + pix] = arg;
    }
  }
  return out;
}

EvalAccumulator::EvalAccumulator(int num_classes, double spacing, bool boundary)
    : num_classes_(num_classes),
      spacing_(spacing),
      boundary_(boundary),
      dice_sum_(static_cast<std::size_t>(num_classes > 1 ? num_classes - 1 : 0), 0.0),
      hd_sum_(dice_sum_.size(), 0.0),
      hd_defined_(dice_sum_.size(), 0) {
  if (num_classes < 2) {
    throw std::invalid_argument("eval: need at least one foreground class");
  }
}

void EvalAccumulator::add(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt) {
  check_label_pair(pred, gt, "eval");
  for (int cls = 1; cls < num_classes_; ++cls) {
    dice_sum_[cls - 1] += dice_score(pred, gt, cls);
    if (auto hd = hausdorff(pred, gt, cls, spacing_, boundary_)) {
      hd_sum_[cls - 1] += *hd;
      hd_defined_[cls - 1] += 1;
    }
  }
  samples_ += 1;
}

EvalReport EvalAccumulator::report() const {
  EvalReport rep;
  rep.samples = samples_;
  double dice_total = 0.0;
  double hd_total = 0.0;
  int hd_classes = 0;
  for (int cls = 1; cls < num_classes_; ++cls) {
    const std::size_t i = static_cast<std::size_t>(cls - 1);
    rep.classes.push_back(cls);
    const double d = samples_ > 0 ? dice_sum_[i] / static_cast<double>(samples_) : 0.0;
    rep.dice.push_back(d);
    dice_total += d;
    if (hd_defined_[i] > 0) {
      const double hd = hd_sum_[i] / static_cast<double>(hd_defined_[i]);
      rep.hd.push_back(hd);
      hd_total += hd;
      hd_classes += 1;
    } else {
      rep.hd.push_back(std::nullopt);
    }
  }
  rep.mean_dice = rep.classes.empty() ? 0.0 : dice_total / static_cast<double>(rep.classes.size());
  if (hd_classes > 0) rep.mean_hd = hd_total / hd_classes;
  return rep;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t i = 0; i < classes.size(); ++i) {
    nlohmann::json row = {{"class", classes[i]}, {"dice", dice[i]}};
    if (hd[i]) {
      row["hd"] = *hd[i];
    } else {
      row["hd"] = nullptr;
    }
    per_class.push_back(row);
  }
  nlohmann::json j = {{"per_class", per_class},
                      {"mean_dice", mean_dice},
                      {"samples", samples}};
  if (mean_hd) {
    j["mean_hd"] = *mean_hd;
  } else {
    j["mean_hd"] = nullptr;
  }
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(8) << "metric";
  for (int cls : classes) os << std::right << std::setw(10) << ("class " + std::to_string(cls));
  os << std::right << std::setw(10) << "avg" << "\n";
  os << std::left << std::setw(8) << "dice" << std::fixed << std::setprecision(4);
  for (double d : dice) os << std::right << std::setw(10) << d;
  os << std::right << std::setw(10) << mean_dice << "\n";
  os << std::left << std::setw(8) << "hd";
  for (const auto& h : hd) {
    if (h) {
      os << std::right << std::setw(10) << *h;
    } else {
      os << std::right << std::setw(10) << "n/a";
    }
  }
  if (mean_hd) {
    os << std::right << std::setw(10) << *mean_hd << "\n";
  } else {
    os << std::right << std::setw(10) << "n/a" << "\n";
  }
  return os.str();
}

template Tensor<float> dice_loss(const Tensor<float>&, const Tensor<std::uint8_t>&, double,
                                 bool);
template Tensor<double> dice_loss(const Tensor<double>&, const Tensor<std::uint8_t>&, double,
                                  bool);
template Tensor<std::uint8_t> argmax_labels(const Tensor<float>&);
template Tensor<std::uint8_t> argmax_labels(const Tensor<double>&);

}  // namespace cams
