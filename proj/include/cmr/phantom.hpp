#pragma once

#include <cstdint>
#include <vector>

#include "cmr/diagnosis.hpp"
#include "cmr/features.hpp"
#include "cmr/volume.hpp"

namespace cmr {

// Synthetic data with known geometry, used by the acceptance suite, the
// `phantom` CLI command and the end-to-end pipeline check.

struct DiskCineOptions {
  std::size_t nx = 128;
  std::size_t ny = 128;
  std::size_t nz = 1;
  std::size_t nt = 30;
  double r_min = 10.0;  // px, radius oscillates r_min <-> r_max once per cycle
  double r_max = 14.0;
  double spacing_mm = 1.5;
  double disk_intensity = 1.0;
  double noise_sigma = 0.0;  // per-frame Gaussian noise
};

/// Bright disk pulsating over a static smooth random texture.
ScalarVolume pulsating_disk_cine(PixelCoord center, std::uint64_t seed, const DiskCineOptions& opts = {});

/// Wall thickness (px) sampled at evenly spaced angles, interpolated
/// linearly and periodically in between.
struct WallProfile {
  std::vector<double> thickness_px;
  double at(double theta) const;
  double mean() const;
};

struct HeartGeometry {
  double lv_radius = 14.0;  // px, blood pool
  WallProfile wall;
  double rv_radius = 14.0;
};

struct HeartPhantomSpec {
  std::size_t nx = 96;
  std::size_t ny = 96;
  std::size_t nz = 3;
  Spacing4 spacing{1.5, 1.5, 8.0, 1.0};
  double cx = 48.0;  // LV centre, px
  double cy = 48.0;
  double taper = 0.12;  // relative radius loss per slice towards the apex
  HeartGeometry ed;
  HeartGeometry es;
};

/// 3D label volume (BG / RV / MYO / LV) for one geometry.
LabelVolume render_heart(const HeartPhantomSpec& spec, const HeartGeometry& g);
PhaseLabels heart_phases(const HeartPhantomSpec& spec);

struct CohortCase {
  HeartPhantomSpec spec;
  Disease label = Disease::kDCM;
};

/// Alternating DCM-like (dilated, thin uniform wall) and MINF-like (normal
/// wall with a thinned sector) cases. LV/RV sizes, ejection fractions and
/// mean wall thickness are drawn from the same ranges for both groups, so
/// volumetric features overlap and only the wall profile differs.
std::vector<CohortCase> mwt_cohort(std::size_t n, std::uint64_t seed);

struct PhantomCase {
  ScalarVolume cine;  // (nx, ny, nz, nt)
  LabelVolume ed;
  LabelVolume es;
  std::size_t ed_frame = 0;
  std::size_t es_frame = 0;
  PixelCoord lv_center;
};

/// Cine whose frames interpolate the ED and ES geometries over one cycle
/// (ED at frame 0, ES at frame nt/2) with ground-truth labels at both phases.
PhantomCase phantom_case(const HeartPhantomSpec& spec, std::size_t nt, std::uint64_t seed);

/// A fixed, reasonable heart used by the CLI and the determinism check.
HeartPhantomSpec default_heart();

}  // namespace cmr
