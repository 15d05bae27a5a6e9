#pragma once

#include "cmr/volume.hpp"

namespace cmr {

/// Separable Gaussian blur, kernel truncated at ceil(3 sigma), borders
/// replicated. sigma <= 0 returns the input unchanged.
Image<double> gaussian_smooth(const Image<double>& img, double sigma);

/// Canny edge detector.
///
/// Gaussian smoothing (sigma), Sobel gradients, non-maximum suppression along
/// the gradient direction quantised to 0/45/90/135 degrees, and hysteresis
/// with thresholds `low * gmax` and `high * gmax`, where gmax is the largest
/// gradient magnitude in the slice. NMS keeps a pixel that is strictly larger
/// than its backward neighbour and not smaller than its forward neighbour, so
/// a symmetric ridge yields a single-pixel line.
///
/// Output is 0/1. A slice without gradient produces an empty map.
Mask2 canny_edges(const Image<double>& img, double sigma, double low, double high);

/// Binary dilation with the 3x3 cross, repeated `iterations` times.
Mask2 dilate_cross(const Mask2& mask, int iterations);

/// Pixels of `mask` with at least one in-grid 4-neighbour outside `mask`.
Mask2 inner_boundary(const Mask2& mask);

/// Zhang-Suen thinning: connectivity-preserving erosion down to 1 px width.
Mask2 thin(const Mask2& mask);

/// One-pixel contour of a binary region: Canny(sigma) edges of the mask,
/// dilated once with the cross, restricted to the region's inner boundary,
/// then thinned. The contour therefore always lies on region pixels.
Mask2 region_contour(const Mask2& region, double sigma);

std::size_t count_nonzero(const Mask2& mask) noexcept;

Image<double> to_real(const Mask2& mask);

}  // namespace cmr
