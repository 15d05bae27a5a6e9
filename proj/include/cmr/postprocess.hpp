#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cmr/volume.hpp"

namespace cmr {

using Dims3 = std::array<std::size_t, 3>;

struct ComponentLabeling {
  Dims3 dims{0, 0, 0};
  std::vector<std::uint32_t> ids;  // 0 = background, components 1..count()
  std::vector<std::size_t> sizes;  // sizes[id - 1]

  std::size_t count() const noexcept { return sizes.size(); }
};

/// Connected components of a binary grid stored x-fastest. Connectivity is
/// 4 or 8 for 2D grids (nz == 1) and 6 or 26 for 3D grids. Ids are assigned
/// in raster order of each component's first voxel.
ComponentLabeling connected_components(std::span<const std::uint8_t> mask, Dims3 dims,
                                       int connectivity);
ComponentLabeling connected_components(const Mask2& mask, int connectivity);

/// Keeps only the largest component; equal sizes keep the lowest id.
std::vector<std::uint8_t> keep_largest(std::span<const std::uint8_t> mask, Dims3 dims,
                                       int connectivity);
Mask2 keep_largest(const Mask2& mask, int connectivity);

/// Background not 4-connected to the slice border becomes foreground.
Mask2 fill_holes(const Mask2& mask);

struct PostprocessOptions {
  bool largest_3d = true;
  bool largest_2d = true;
  bool fill = true;
  int max_rounds = 8;
};

/// Per time frame and per class (LV, then MYO, then RV): largest 3D
/// component (26-connected), largest 2D component per slice (8-connected),
/// then hole filling per slice. LV and RV holes take their class. Holes of
/// the MYO mask take LV when they contain LV pixels (the cavity) and MYO
/// otherwise. Filling only ever rewrites background pixels. The sequence is
/// repeated until nothing changes (at most max_rounds), which makes the
/// result a fixed point.
LabelVolume postprocess_labels(const LabelVolume& lbl, const PostprocessOptions& opts = {});

}  // namespace cmr
