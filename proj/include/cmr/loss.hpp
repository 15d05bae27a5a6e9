#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

/// Per-voxel, per-class reals over a voxel grid (logits or probabilities).
/// Storage is class-slowest: value(c, v) lives at c * voxels() + v, which is
/// also the layout of a 4D volume file whose last axis indexes classes.
class ClassField {
 public:
  ClassField() = default;
  ClassField(std::size_t classes, Dims4 grid, double fill = 0.0);

  std::size_t classes() const noexcept { return classes_; }
  std::size_t voxels() const noexcept { return voxels_; }
  const Dims4& grid() const noexcept { return grid_; }

  double& operator()(std::size_t c, std::size_t v) { return data_[c * voxels_ + v]; }
  double operator()(std::size_t c, std::size_t v) const { return data_[c * voxels_ + v]; }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(data_).subspan(c * voxels_, voxels_);
  }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

 private:
  std::size_t classes_ = 0;
  std::size_t voxels_ = 0;
  Dims4 grid_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// A (nx, ny, nz, C) volume read as C class channels over an (nx, ny, nz) grid.
ClassField class_field_from_volume(const ScalarVolume& v);
ScalarVolume class_field_to_volume(const ClassField& f, Spacing4 spacing);

using WeightMap = Volume<double>;

struct WeightMapTerms {
  WeightMap class_term;    // sum_l |N| 1_T_l / |T_l|
  WeightMap contour_term;  // sum_l |N| 1_C_l / |C_l|
  WeightMap total() const;
};

/// Spatial weight map, evaluated independently on every (z, t) slice with
/// N = the slice. C_l is the Canny (sigma 1) contour of class l's binary
/// mask, dilated `dilate_iters` times with the 3x3 cross and restricted to
/// T_l. Classes with an empty contour contribute no contour term.
WeightMapTerms weight_map_terms(const LabelVolume& lbl, int dilate_iters = 1,
                                const LabelSchema& schema = {});
WeightMap build_weight_map(const LabelVolume& lbl, int dilate_iters = 1,
                           const LabelSchema& schema = {});

struct LossConfig {
  double lambda = 1.0;
  double gamma = 1.0;
  double eta = 5e-4;
  double epsilon = 1e-5;
  bool dice_two_factor = true;

  void validate() const;
};

/// Probability floor inside the log of the cross-entropy.
inline constexpr double kLogClamp = 1e-12;

struct LossDiagnostics {
  std::size_t clamped = 0;  // voxels whose target probability hit kLogClamp
};

/// Max-subtracted softmax over the class axis.
ClassField softmax(const ClassField& logits);

/// Labels are class indices (label id == channel). `weights` may be null
/// for unit weights.
double weighted_ce(const ClassField& p, const LabelVolume& t, const WeightMap* weights,
                   LossDiagnostics* diag = nullptr);

double soft_dice_class(std::span<const double> p, std::span<const std::uint8_t> g, double eps,
                       bool two_factor);

/// |M| / |M_l| per class; absent classes are nullopt.
std::vector<std::optional<double>> minibatch_class_weights(const LabelVolume& t,
                                                           std::size_t classes);

/// 1 - weighted mean of per-class soft Dice over the classes present in t.
double dice_loss(const ClassField& p, const LabelVolume& t, const LossConfig& cfg);

struct LossBreakdown {
  double ce = 0.0;
  double dice_loss = 0.0;
  double l2_term = 0.0;
  double total = 0.0;
  std::size_t clamped = 0;
};

LossBreakdown total_loss_from_probs(const ClassField& p, const LabelVolume& t,
                                    const WeightMap* weights, const LossConfig& cfg,
                                    double l2_of_weights = 0.0);
LossBreakdown total_loss(const ClassField& logits, const LabelVolume& t, const WeightMap* weights,
                         const LossConfig& cfg, double l2_of_weights = 0.0);

/// d total_loss / d logits, excluding the weight-decay term.
ClassField total_loss_grad(const ClassField& logits, const LabelVolume& t,
                           const WeightMap* weights, const LossConfig& cfg);

}  // namespace cmr
