#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cmr/error.hpp"

namespace cmr {

/// Row-major 2D grid (x fastest). Used for single slices and edge maps.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(std::size_t nx, std::size_t ny, T fill = T{})
      : nx_(nx), ny_(ny), data_(nx * ny, fill) {}
  Image(std::size_t nx, std::size_t ny, std::vector<T> data)
      : nx_(nx), ny_(ny), data_(std::move(data)) {
    if (data_.size() != nx_ * ny_) {
      fail(ErrorCode::kArgument, "image data length does not match dims");
    }
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * nx_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const {
    return data_[y * nx_ + x];
  }
  bool inside(long x, long y) const noexcept {
    return x >= 0 && y >= 0 && static_cast<std::size_t>(x) < nx_ &&
           static_cast<std::size_t>(y) < ny_;
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<T> data_;
};

using Mask2 = Image<std::uint8_t>;

using Dims4 = std::array<std::size_t, 4>;
using Spacing4 = std::array<double, 4>;

/// 4D grid (x, y, z, t) with per-axis physical spacing. Voxels are stored
/// x-fastest, then y, z, t. 3D data is represented with nt == 1 and
/// ndims() == 3, which only affects how the header is written.
template <typename T>
class Volume {
 public:
  Volume() = default;
  Volume(Dims4 dims, Spacing4 spacing, int ndims = 4)
      : Volume(dims, spacing, std::vector<T>(product(dims)), ndims) {}
  Volume(Dims4 dims, Spacing4 spacing, std::vector<T> data, int ndims = 4);

  const Dims4& dims() const noexcept { return dims_; }
  const Spacing4& spacing() const noexcept { return spacing_; }
  int ndims() const noexcept { return ndims_; }
  std::size_t nx() const noexcept { return dims_[0]; }
  std::size_t ny() const noexcept { return dims_[1]; }
  std::size_t nz() const noexcept { return dims_[2]; }
  std::size_t nt() const noexcept { return dims_[3]; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t slice_size() const noexcept { return dims_[0] * dims_[1]; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z,
                    std::size_t t = 0) const noexcept {
    return ((t * dims_[2] + z) * dims_[1] + y) * dims_[0] + x;
  }
  T& operator()(std::size_t x, std::size_t y, std::size_t z, std::size_t t = 0) {
    return data_[index(x, y, z, t)];
  }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z,
                      std::size_t t = 0) const {
    return data_[index(x, y, z, t)];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  Image<T> slice(std::size_t z, std::size_t t) const;
  void set_slice(std::size_t z, std::size_t t, const Image<T>& img);

  /// Same geometry, different element type.
  template <typename U>
  Volume<U> like(U fill = U{}) const {
    return Volume<U>(dims_, spacing_, std::vector<U>(data_.size(), fill), ndims_);
  }

  friend bool operator==(const Volume&, const Volume&) = default;

  static std::size_t product(const Dims4& d) noexcept {
    return d[0] * d[1] * d[2] * d[3];
  }

 private:
  Dims4 dims_{0, 0, 0, 0};
  Spacing4 spacing_{1, 1, 1, 1};
  int ndims_ = 4;
  std::vector<T> data_;
};

using ScalarVolume = Volume<float>;
using LabelVolume = Volume<std::uint8_t>;

struct LabelClass {
  std::uint8_t id;
  std::string name;
  friend bool operator==(const LabelClass&, const LabelClass&) = default;
};

/// Ordered set of label ids. Id 0 is always background.
class LabelSchema {
 public:
  LabelSchema();  // BG, RV, MYO, LV
  explicit LabelSchema(std::vector<LabelClass> classes);

  static constexpr std::uint8_t kBackground = 0;
  static constexpr std::uint8_t kRV = 1;
  static constexpr std::uint8_t kMYO = 2;
  static constexpr std::uint8_t kLV = 3;

  const std::vector<LabelClass>& classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return classes_.size(); }
  bool contains(std::uint8_t id) const noexcept;
  std::size_t position(std::uint8_t id) const;  // index into classes()
  std::uint8_t max_id() const noexcept;

 private:
  std::vector<LabelClass> classes_;
};

/// Throws kArgument naming the first out-of-schema voxel.
void validate_labels(const LabelVolume& v, const LabelSchema& schema);

enum class VolumeKind { kScalar, kLabel };
using AnyVolume = std::variant<ScalarVolume, LabelVolume>;

ScalarVolume load_scalar_volume(const std::filesystem::path& path);
LabelVolume load_label_volume(const std::filesystem::path& path,
                              const LabelSchema& schema = LabelSchema{});
AnyVolume load_volume(const std::filesystem::path& path, VolumeKind kind);
/// Kind recorded in the file's ElementType (UINT8 -> label, FLOAT32 -> scalar).
VolumeKind stored_volume_kind(const std::filesystem::path& path);

void save_volume(const ScalarVolume& v, const std::filesystem::path& path);
void save_volume(const LabelVolume& v, const std::filesystem::path& path);

/// Header + payload as an in-memory byte string (used by save_volume).
std::string encode_volume(const ScalarVolume& v);
std::string encode_volume(const LabelVolume& v);
AnyVolume decode_volume(std::string_view bytes, VolumeKind kind,
                        const std::string& origin = "<memory>");

/// Per (z,t) slice: (X - min) / (max - min). Constant slices become 0.
ScalarVolume normalize_slicewise(const ScalarVolume& v);

struct PixelCoord {
  long x = 0;
  long y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct PatchSize {
  std::size_t w = 128;
  std::size_t h = 128;
  friend bool operator==(const PatchSize&, const PatchSize&) = default;
};

/// Window of a source volume. Patch voxel (w/2, h/2) sits on `center`;
/// everything outside the source grid reads as zero (background for labels).
template <typename T>
struct Patch {
  PixelCoord center;
  PatchSize size;
  Volume<T> data;  // dims (w, h, nz, nt)
};

template <typename T>
Patch<T> crop_patch(const Volume<T>& v, PixelCoord center, PatchSize size);

/// Writes the patch back into `dst` at its center, clipping to the grid.
template <typename T>
void embed_patch(const Patch<T>& p, Volume<T>& dst);

/// Symmetric zero-pad or centre crop of every slice to `target`.
template <typename T>
Volume<T> pad_or_center_crop(const Volume<T>& v, PatchSize target);

}  // namespace cmr
