#pragma once

#include <span>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

struct RoiConfig {
  int radius_min = 10;  // px
  int radius_max = 40;  // px
  int top_p = 5;        // circles kept per slice
  double vote_sigma = 8.0;
  double h1_noise_frac = 0.01;
  double canny_sigma = 1.0;
  double canny_low = 0.1;   // fraction of the slice's gradient maximum
  double canny_high = 0.2;
  PatchSize patch_size{128, 128};

  void validate() const;
};

/// Per-voxel magnitude of the first temporal DFT harmonic; dims (nx, ny, nz, 1).
using H1Volume = Volume<double>;

struct HoughCircle {
  PixelCoord center;
  int radius = 0;
  double score = 0.0;  // supported fraction of the discrete circle, in [0, 1]
};

struct SliceCircles {
  std::size_t z = 0;
  std::vector<HoughCircle> circles;
};

struct HoughResult {
  std::vector<SliceCircles> per_slice;
  Image<double> likelihood;  // (nx, ny), accumulated Gaussian votes
  PixelCoord roi_center;
};

/// |sum_t x(t) exp(-2 pi i t / T)| for every voxel. Requires nt >= 2.
H1Volume temporal_h1(const ScalarVolume& v);

/// The same magnitude for a single double-precision series.
double h1_magnitude(std::span<const double> series);

/// Zeroes values strictly below `frac` times the volume-wide maximum.
H1Volume denoise_h1(const H1Volume& h, double frac);

/// Circular Hough transform over radii [radius_min, radius_max].
///
/// Each edge pixel votes for every centre at distance r (discrete ring of
/// lattice offsets whose length is within half a pixel of r). A candidate's
/// score is its vote count divided by the ring size. Candidates must be local
/// maxima of the (x, y, r) score volume; they are taken best-first and a
/// candidate is dropped when an already-kept circle has its centre closer
/// than radius_min *and* a radius within 2 px (a duplicate of the same
/// circle). Concentric circles of distinct radii therefore both survive.
/// Returns at most top_p circles; an empty edge map gives an empty list.
std::vector<HoughCircle> hough_circles(const Mask2& edges, const RoiConfig& cfg);

/// temporal_h1 -> denoise_h1 -> per-slice Canny -> hough_circles, then
/// Gaussian centre votes (sigma = vote_sigma, weight = score, kernel
/// truncated at 3 sigma and renormalised to unit mass) into a shared
/// likelihood surface. roi_center is its argmax; ties go to the lowest
/// (y, x). Throws kLocate when no slice yields a circle.
HoughResult locate_roi(const ScalarVolume& v, const RoiConfig& cfg);

/// Square Gaussian stencil used for votes; exposed for tests.
Image<double> vote_kernel(double sigma);

}  // namespace cmr
