#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmr/postprocess.hpp"
#include "cmr/volume.hpp"

namespace cmr {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

/// Overlap ratio. Both masks empty reports 1.0 with `both_empty` set so that
/// aggregation can skip it.
struct Overlap {
  double value = 0.0;
  bool both_empty = false;
};

Overlap dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);
Overlap jaccard(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

/// 0/0 ratios are nullopt.
struct Rates {
  std::optional<double> tpr;
  std::optional<double> spc;
  std::optional<double> ppv;
  std::optional<double> npv;
};

Rates rates(const ConfusionCounts& c);

using Spacing3 = std::array<double, 3>;

/// Symmetric Hausdorff distance in mm between two binary masks (full
/// regions, not extracted contours). Exhaustive pairwise search; throws
/// kUndefinedDistance when either mask is empty.
double hausdorff_mm(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                    Dims3 dims, Spacing3 spacing);

/// Same quantity via exact squared Euclidean distance transforms
/// (lower envelope of parabolas, one pass per axis).
double hausdorff_mm_fast(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                         Dims3 dims, Spacing3 spacing);

/// Squared distance (mm^2) from every voxel to the nearest set voxel of
/// `mask`; +inf everywhere when the mask is empty.
std::vector<double> squared_distance_transform(std::span<const std::uint8_t> mask, Dims3 dims,
                                               Spacing3 spacing);

struct ClassMetrics {
  std::uint8_t class_id = 0;
  std::string name;
  ConfusionCounts counts;
  Overlap dice;
  Overlap jaccard;
  Rates rates;
  std::optional<double> hd_mm;  // nullopt when either mask is empty
};

/// Per foreground class of the schema. Both volumes must be 3D (nt == 1)
/// with equal dims.
std::vector<ClassMetrics> evaluate_case(const LabelVolume& pred, const LabelVolume& gt,
                                        const LabelSchema& schema = {});

struct MetricStats {
  std::optional<double> mean;
  std::optional<double> stdev;  // population
  std::size_t n = 0;
};

struct ClassSummary {
  std::uint8_t class_id = 0;
  std::string name;
  MetricStats dice, jaccard, tpr, spc, ppv, npv, hd_mm;
};

/// Mean and population stdev per class across cases. Undefined rates,
/// undefined distances and both-empty overlaps are left out.
std::vector<ClassSummary> summarize(const std::vector<std::vector<ClassMetrics>>& cases);

}  // namespace cmr
