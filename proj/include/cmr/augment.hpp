#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "cmr/volume.hpp"

namespace cmr {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct AugmentParams {
  double angle_deg = 0.0;
  Vec2 shift_mm;
  double zoom = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  // Control points at the image corners, row-major: (0,0) (1,0) (0,1) (1,1).
  std::array<Vec2, 4> elastic_grid{};
  bool flip_h = false;
  bool flip_v = false;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

struct AugmentBounds {
  double max_angle_deg = 5.0;
  double max_shift_mm = 5.0;
  double zoom_min = 0.8;
  double zoom_max = 1.2;
  double noise_sigma = 0.01;
  double max_elastic_mm = 3.0;
};

/// Draws one parameter set. Same seed, same parameters, on every platform
/// (uniforms are derived directly from the 64-bit Mersenne twister output).
/// Flips are sampled only when `flips` is set.
AugmentParams sample_params(std::uint64_t seed, bool flips = false,
                            const AugmentBounds& bounds = {});

struct Augmented {
  Image<float> image;
  std::optional<Mask2> labels;
};

/// Applies rotate . translate . zoom . elastic in one backward-mapping pass.
///
/// For every output pixel p (in mm about the image centre) the source
/// position is obtained by undoing the rotation, the shift and the zoom,
/// then adding the elastic displacement evaluated there. The elastic field is
/// a uniform cubic B-spline over the 2x2 control grid, with the grid padded
/// by edge replication to the 4x4 support the cubic basis needs. Images are
/// resampled bilinearly, labels by nearest neighbour; samples outside the
/// grid read as 0 / background. Source positions within 1e-9 px of a lattice
/// point snap to it, so the identity transform is exact. Flips are applied
/// last, then zero-mean Gaussian noise (image only).
Augmented apply_augment(const Image<float>& img, const Mask2* labels, const AugmentParams& p,
                        std::array<double, 2> spacing);

/// Dense elastic displacement (mm) at normalised position (u, v) in [0,1]^2.
Vec2 elastic_displacement(const std::array<Vec2, 4>& grid, double u, double v);

}  // namespace cmr
