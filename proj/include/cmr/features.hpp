#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

struct FeatureOptions {
  double myo_density = 1.05;  // g/mL
  double canny_sigma = 1.0;

  void validate() const;
};

/// Voxel count of `cls` times the voxel volume, in mL. Counts every frame.
double class_volume_ml(const LabelVolume& lbl, std::uint8_t cls);
double myo_mass_g(const LabelVolume& ed, double density = 1.05);

/// (edv - esv) / edv; nullopt when edv == 0.
std::optional<double> ejection_fraction(double edv, double esv);

struct MwtSlice {
  std::size_t z = 0;
  std::vector<double> thickness;  // mm, one per interior contour pixel
  double mean = 0.0;
  double stdev = 0.0;  // population
};

enum class MwtExclusion { kNoMyocardium, kNoCavity, kNoContour };

struct MwtExcluded {
  std::size_t z = 0;
  MwtExclusion reason = MwtExclusion::kNoMyocardium;
};

struct MwtResult {
  std::vector<MwtSlice> slices;
  std::vector<MwtExcluded> excluded;
};

std::string_view exclusion_name(MwtExclusion r) noexcept;

/// Wall thickness of one short-axis slice. Epicardial region = hole-filled
/// MYO, cavity = epicardial region minus MYO. For every pixel of the cavity
/// contour the distance (mm, per-axis spacing) to the nearest epicardial
/// contour pixel. nullopt with `why` set when the slice cannot be measured.
std::optional<MwtSlice> mwt_slice(const Image<std::uint8_t>& labels, double sx, double sy,
                                  double sigma = 1.0, MwtExclusion* why = nullptr);

/// All slices of a 3D label volume.
MwtResult mwt_phase(const LabelVolume& lbl, double sigma = 1.0);

/// max of slice means, stdev of slice means, mean of slice stdevs, stdev of
/// slice stdevs (population). All nullopt without a valid slice.
std::array<std::optional<double>, 4> mwt_profile_features(const MwtResult& mwt);

inline constexpr std::size_t kFeatureCount = 20;

/// Index of the first ES wall-thickness statistic; the four features from
/// here on feed the MINF/DCM expert.
inline constexpr std::size_t kExpertFeatureBegin = 16;

/// Column names in record order.
const std::array<std::string_view, kFeatureCount>& feature_names() noexcept;

struct FeatureRecord {
  std::array<std::optional<double>, kFeatureCount> values{};

  bool complete() const noexcept;
  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct PhaseLabels {
  LabelVolume ed;
  LabelVolume es;
  std::optional<double> height_cm;  // stored, not used as features
  std::optional<double> weight_kg;
};

/// Both phases must be 3D with equal dims and spacing.
FeatureRecord extract_features(const PhaseLabels& phases, const FeatureOptions& opts = {});

/// CSV with a leading case_id column; missing values are empty cells.
std::string features_csv_header();
std::string features_csv_row(const std::string& case_id, const FeatureRecord& r);

struct FeatureTable {
  std::vector<std::string> case_ids;
  std::vector<FeatureRecord> records;
};

/// Parses the format written above. Column order must match exactly.
FeatureTable parse_features_csv(std::string_view text);

}  // namespace cmr
