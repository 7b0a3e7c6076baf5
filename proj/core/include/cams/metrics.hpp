#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cams/tensor.hpp"

#include "json.hpp"

namespace cams {

// Soft Dice loss over class probabilities. Per batch element and class:
// (2 sum(p t) + eps) / (sum(p) + sum(t) + eps) with t the one-hot target;
// the loss is 1 minus the mean over the (batch, class) pairs. With
// include_background false, class 0 is left out of that mean so the
// dominant background region cannot crowd out the foreground gradients.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& probs, const Tensor<std::uint8_t>& target,
                    double eps = 1e-6, bool include_background = true);

// Hard Dice on label maps [H, W]: 2|P & G| / (|P| + |G|); 1.0 when class k is
// absent from both.
double dice_score(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt, int cls);

// Exact symmetric Hausdorff distance between the class-k pixel sets,
// Euclidean, scaled by spacing (mm per pixel). Empty on either side maps to
// nullopt. boundary restricts both sets to their boundary pixels first.
std::optional<double> hausdorff(const Tensor<std::uint8_t>& pred,
                                const Tensor<std::uint8_t>& gt, int cls, double spacing = 1.0,
                                bool boundary = false);

// Per-pixel argmax over the class axis of [B, K, H, W]; ties resolve to the
// lowest class index.
template <typename T>
Tensor<std::uint8_t> argmax_labels(const Tensor<T>& probs);

struct EvalReport {
  std::vector<int> classes;                     // foreground classes, 1..K-1
  std::vector<double> dice;                     // mean per class
  std::vector<std::optional<double>> hd;        // mean per class over defined samples
  double mean_dice = 0.0;
  std::optional<double> mean_hd;                // mean of defined per-class values
  std::int64_t samples = 0;

  nlohmann::json to_json() const;
  std::string table() const;  // aligned text, one column per class plus Avg
};

// Streams (pred, gt) label-map pairs and averages Dice / Hausdorff per
// foreground class. Samples where a class's HD is undefined (empty on either
// side) are excluded from that class's HD average.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(int num_classes, double spacing = 1.0, bool boundary = false);

  void add(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt);
  EvalReport report() const;

 private:
  int num_classes_;
  double spacing_;
  bool boundary_;
  std::int64_t samples_ = 0;
  std::vector<double> dice_sum_;
  std::vector<double> hd_sum_;
  std::vector<std::int64_t> hd_defined_;
};

}  // namespace cams
