#include "cmr/volume.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace cmr {

template <typename T>
Volume<T>::Volume(Dims4 dims, Spacing4 spacing, std::vector<T> data, int ndims)
    : dims_(dims), spacing_(spacing), ndims_(ndims), data_(std::move(data)) {
  if (ndims_ != 3 && ndims_ != 4) {
    fail(ErrorCode::kArgument, "volume ndims must be 3 or 4");
  }
  if (ndims_ == 3 && dims_[3] != 1) {
    fail(ErrorCode::kArgument, "3D volume must have nt == 1");
  }
  for (std::size_t a = 0; a < 4; ++a) {
    if (dims_[a] == 0) fail(ErrorCode::kArgument, "volume dims must be positive");
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a])) {
      fail(ErrorCode::kArgument, "volume spacing must be positive and finite");
    }
  }
  if (data_.size() != product(dims_)) {
    fail(ErrorCode::kArgument, "volume data length " + std::to_string(data_.size()) +
                                   " does not match dims product " +
                                   std::to_string(product(dims_)));
  }
  if constexpr (std::is_floating_point_v<T>) {
    for (const T x : data_) {
      if (!std::isfinite(x)) fail(ErrorCode::kArgument, "volume contains non-finite values");
    }
  }
}

template <typename T>
Image<T> Volume<T>::slice(std::size_t z, std::size_t t) const {
  const std::size_t n = slice_size();
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(index(0, 0, z, t));
  return Image<T>(nx(), ny(), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(n)));
}

template <typename T>
void Volume<T>::set_slice(std::size_t z, std::size_t t, const Image<T>& img) {
  if (img.nx() != nx() || img.ny() != ny()) {
    fail(ErrorCode::kArgument, "slice dims do not match volume");
  }
  std::copy(img.values().begin(), img.values().end(),
            data_.begin() + static_cast<std::ptrdiff_t>(index(0, 0, z, t)));
}

template class Volume<float>;
template class Volume<double>;
template class Volume<std::uint8_t>;

// --- schema ---------------------------------------------------------------

LabelSchema::LabelSchema()
    : classes_{{0, "BG"}, {1, "RV"}, {2, "MYO"}, {3, "LV"}} {}

LabelSchema::LabelSchema(std::vector<LabelClass> classes) : classes_(std::move(classes)) {
  if (classes_.empty() || classes_.front().id != kBackground) {
    fail(ErrorCode::kArgument, "label schema must start with background id 0");
  }
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    for (std::size_t j = i + 1; j < classes_.size(); ++j) {
      if (classes_[i].id == classes_[j].id) {
        fail(ErrorCode::kArgument, "duplicate label id " + std::to_string(classes_[i].id));
      }
    }
  }
}

bool LabelSchema::contains(std::uint8_t id) const noexcept {
  return std::any_of(classes_.begin(), classes_.end(),
                     [id](const LabelClass& c) { return c.id == id; });
}

std::size_t LabelSchema::position(std::uint8_t id) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id == id) return i;
  }
  fail(ErrorCode::kArgument, "label id " + std::to_string(id) + " not in schema");
}

std::uint8_t LabelSchema::max_id() const noexcept {
  std::uint8_t m = 0;
  for (const auto& c : classes_) m = std::max(m, c.id);
  return m;
}

void validate_labels(const LabelVolume& v, const LabelSchema& schema) {
  std::array<bool, 256> allowed{};
  for (const auto& c : schema.classes()) allowed[c.id] = true;
  const auto vals = v.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (!allowed[vals[i]]) {
      fail(ErrorCode::kArgument, "label " + std::to_string(vals[i]) + " at voxel " +
                                     std::to_string(i) + " is not in the label schema");
    }
  }
}

// --- file format ----------------------------------------------------------

namespace {

constexpr const char* kKeys[] = {"NDims", "DimSize", "ElementSpacing", "ElementType",
                                 "ElementDataFile"};

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string encode(const Volume<T>& v, const char* type_name) {
  std::ostringstream h;
  const int nd = v.ndims();
  h << "NDims = " << nd << "\n";
  h << "DimSize =";
  for (int a = 0; a < nd; ++a) h << ' ' << v.dims()[static_cast<std::size_t>(a)];
  h << "\nElementSpacing =";
  for (int a = 0; a < nd; ++a) h << ' ' << format_double(v.spacing()[static_cast<std::size_t>(a)]);
  h << "\nElementType = " << type_name << "\nElementDataFile = LOCAL\n\n";
  std::string out = h.str();
  const std::size_t header = out.size();
  out.resize(header + v.size() * sizeof(T));
  char* dst = out.data() + header;
  if constexpr (sizeof(T) == 1 || std::endian::native == std::endian::little) {
    std::memcpy(dst, v.values().data(), v.size() * sizeof(T));
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto bits = std::bit_cast<std::uint32_t>(v.values()[i]);
      for (int b = 0; b < 4; ++b) dst[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  return out;
}

struct Header {
  int ndims = 0;
  Dims4 dims{1, 1, 1, 1};
  Spacing4 spacing{1, 1, 1, 1};
  std::string type;
  std::size_t payload_offset = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void bad_key(const std::string& origin, const char* key, const std::string& why) {
  fail(ErrorCode::kFormat, origin + ": malformed header key '" + key + "': " + why);
}

Header parse_header(std::string_view bytes, const std::string& origin) {
  Header h;
  std::size_t pos = 0;
  for (const char* key : kKeys) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) bad_key(origin, key, "missing line");
    std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) bad_key(origin, key, "expected 'Key = Value'");
    if (trim(line.substr(0, eq)) != key) {
      bad_key(origin, key, "found '" + std::string(trim(line.substr(0, eq))) + "' instead");
    }
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string k = key;
    if (k == "NDims") {
      int nd = 0;
      auto r = std::from_chars(value.data(), value.data() + value.size(), nd);
      if (r.ec != std::errc{} || r.ptr != value.data() + value.size() || (nd != 3 && nd != 4)) {
        bad_key(origin, key, "must be 3 or 4");
      }
      h.ndims = nd;
    } else if (k == "DimSize") {
      const auto toks = split_ws(value);
      if (toks.size() != static_cast<std::size_t>(h.ndims)) {
        bad_key(origin, key, "expected " + std::to_string(h.ndims) + " integers");
      }
      for (std::size_t a = 0; a < toks.size(); ++a) {
        std::size_t d = 0;
        auto r = std::from_chars(toks[a].data(), toks[a].data() + toks[a].size(), d);
        if (r.ec != std::errc{} || r.ptr != toks[a].data() + toks[a].size() || d == 0) {
          bad_key(origin, key, "entries must be positive integers");
        }
        h.dims[a] = d;
      }
    } else if (k == "ElementSpacing") {
      const auto toks = split_ws(value);
      if (toks.size() != static_cast<std::size_t>(h.ndims)) {
        bad_key(origin, key, "expected " + std::to_string(h.ndims) + " reals");
      }
      for (std::size_t a = 0; a < toks.size(); ++a) {
        double s = 0;
        auto r = std::from_chars(toks[a].data(), toks[a].data() + toks[a].size(), s);
        if (r.ec != std::errc{} || r.ptr != toks[a].data() + toks[a].size() || !(s > 0) ||
            !std::isfinite(s)) {
          bad_key(origin, key, "entries must be positive finite reals");
        }
        h.spacing[a] = s;
      }
    } else if (k == "ElementType") {
      if (value != "FLOAT32" && value != "UINT8") bad_key(origin, key, "must be FLOAT32 or UINT8");
      h.type = std::string(value);
    } else {
      if (value != "LOCAL") bad_key(origin, key, "must be LOCAL");
    }
  }
  // Blank terminator line.
  if (pos >= bytes.size() || bytes[pos] != '\n') {
    fail(ErrorCode::kFormat, origin + ": header must be terminated by a blank line");
  }
  h.payload_offset = pos + 1;
  return h;
}

template <typename T>
std::vector<T> read_payload(std::string_view bytes, const Header& h, const std::string& origin) {
  const std::size_t n = Volume<T>::product(h.dims);
  const std::size_t elem = h.type == "FLOAT32" ? 4 : 1;
  const std::size_t expected = n * elem;
  const std::size_t actual = bytes.size() - h.payload_offset;
  if (actual != expected) {
    fail(ErrorCode::kSize, origin + ": payload size mismatch: expected " +
                               std::to_string(expected) + " bytes, got " +
                               std::to_string(actual));
  }
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
  std::vector<T> out(n);
  if (elem == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(src[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[i * 4 + b]) << (8 * b);
      const float f = std::bit_cast<float>(bits);
      if constexpr (std::is_same_v<T, float>) {
        out[i] = f;
      } else {
        if (!(f >= 0.0f && f <= 255.0f) || f != std::floor(f)) {
          fail(ErrorCode::kFormat, origin + ": FLOAT32 payload is not integral label data");
        }
        out[i] = static_cast<T>(f);
      }
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace

std::string encode_volume(const ScalarVolume& v) { return encode(v, "FLOAT32"); }
std::string encode_volume(const LabelVolume& v) { return encode(v, "UINT8"); }

AnyVolume decode_volume(std::string_view bytes, VolumeKind kind, const std::string& origin) {
  const Header h = parse_header(bytes, origin);
  if (kind == VolumeKind::kScalar) {
    return ScalarVolume(h.dims, h.spacing, read_payload<float>(bytes, h, origin), h.ndims);
  }
  return LabelVolume(h.dims, h.spacing, read_payload<std::uint8_t>(bytes, h, origin), h.ndims);
}

AnyVolume load_volume(const std::filesystem::path& path, VolumeKind kind) {
  return decode_volume(read_file(path), kind, path.string());
}

VolumeKind stored_volume_kind(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return parse_header(bytes, path.string()).type == "UINT8" ? VolumeKind::kLabel : VolumeKind::kScalar;
}

ScalarVolume load_scalar_volume(const std::filesystem::path& path) {
  return std::get<ScalarVolume>(load_volume(path, VolumeKind::kScalar));
}

LabelVolume load_label_volume(const std::filesystem::path& path, const LabelSchema& schema) {
  auto v = std::get<LabelVolume>(load_volume(path, VolumeKind::kLabel));
  validate_labels(v, schema);
  return v;
}

void save_volume(const ScalarVolume& v, const std::filesystem::path& path) {
  write_file(path, encode_volume(v));
}

void save_volume(const LabelVolume& v, const std::filesystem::path& path) {
  write_file(path, encode_volume(v));
}

// --- intensity / geometry -------------------------------------------------

ScalarVolume normalize_slicewise(const ScalarVolume& v) {
  std::vector<float> out(v.size(), 0.0f);
  const std::size_t n = v.slice_size();
  const auto in = v.values();
  for (std::size_t s = 0; s < v.nz() * v.nt(); ++s) {
    const auto first = in.begin() + static_cast<std::ptrdiff_t>(s * n);
    const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(n));
    const double mn = *lo;
    const double range = static_cast<double>(*hi) - mn;
    if (range <= 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      out[s * n + i] = static_cast<float>((static_cast<double>(in[s * n + i]) - mn) / range);
    }
  }
  return ScalarVolume(v.dims(), v.spacing(), std::move(out), v.ndims());
}

template <typename T>
Patch<T> crop_patch(const Volume<T>& v, PixelCoord center, PatchSize size) {
  if (size.w == 0 || size.h == 0) fail(ErrorCode::kArgument, "patch size must be positive");
  if (center.x < 0 || center.y < 0 || static_cast<std::size_t>(center.x) >= v.nx() ||
      static_cast<std::size_t>(center.y) >= v.ny()) {
    fail(ErrorCode::kArgument, "patch center (" + std::to_string(center.x) + "," +
                                   std::to_string(center.y) + ") lies outside the grid");
  }
  Volume<T> out({size.w, size.h, v.nz(), v.nt()}, v.spacing(), v.ndims());
  const long x0 = center.x - static_cast<long>(size.w / 2);
  const long y0 = center.y - static_cast<long>(size.h / 2);
  for (std::size_t t = 0; t < v.nt(); ++t) {
    for (std::size_t z = 0; z < v.nz(); ++z) {
      for (std::size_t j = 0; j < size.h; ++j) {
        const long sy = y0 + static_cast<long>(j);
        if (sy < 0 || sy >= static_cast<long>(v.ny())) continue;
        for (std::size_t i = 0; i < size.w; ++i) {
          const long sx = x0 + static_cast<long>(i);
          if (sx < 0 || sx >= static_cast<long>(v.nx())) continue;
          out(i, j, z, t) = v(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), z, t);
        }
      }
    }
  }
  return Patch<T>{center, size, std::move(out)};
}

template <typename T>
void embed_patch(const Patch<T>& p, Volume<T>& dst) {
  if (p.data.nz() != dst.nz() || p.data.nt() != dst.nt()) {
    fail(ErrorCode::kArgument, "patch and destination differ in nz/nt");
  }
  const long x0 = p.center.x - static_cast<long>(p.size.w / 2);
  const long y0 = p.center.y - static_cast<long>(p.size.h / 2);
  for (std::size_t t = 0; t < dst.nt(); ++t) {
    for (std::size_t z = 0; z < dst.nz(); ++z) {
      for (std::size_t j = 0; j < p.size.h; ++j) {
        const long sy = y0 + static_cast<long>(j);
        if (sy < 0 || sy >= static_cast<long>(dst.ny())) continue;
        for (std::size_t i = 0; i < p.size.w; ++i) {
          const long sx = x0 + static_cast<long>(i);
          if (sx < 0 || sx >= static_cast<long>(dst.nx())) continue;
          dst(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), z, t) = p.data(i, j, z, t);
        }
      }
    }
  }
}

template <typename T>
Volume<T> pad_or_center_crop(const Volume<T>& v, PatchSize target) {
  if (target.w == 0 || target.h == 0) fail(ErrorCode::kArgument, "target size must be positive");
  Volume<T> out({target.w, target.h, v.nz(), v.nt()}, v.spacing(), v.ndims());
  // Offset of the source origin inside the target (negative when cropping).
  const long ox = (static_cast<long>(target.w) - static_cast<long>(v.nx())) / 2;
  const long oy = (static_cast<long>(target.h) - static_cast<long>(v.ny())) / 2;
  for (std::size_t t = 0; t < v.nt(); ++t) {
    for (std::size_t z = 0; z < v.nz(); ++z) {
      for (std::size_t j = 0; j < target.h; ++j) {
        const long sy = static_cast<long>(j) - oy;
        if (sy < 0 || sy >= static_cast<long>(v.ny())) continue;
        for (std::size_t i = 0; i < target.w; ++i) {
          const long sx = static_cast<long>(i) - ox;
          if (sx < 0 || sx >= static_cast<long>(v.nx())) continue;
          out(i, j, z, t) = v(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), z, t);
        }
      }
    }
  }
  return out;
}

template Patch<float> crop_patch(const Volume<float>&, PixelCoord, PatchSize);
template Patch<std::uint8_t> crop_patch(const Volume<std::uint8_t>&, PixelCoord, PatchSize);
template void embed_patch(const Patch<float>&, Volume<float>&);
template void embed_patch(const Patch<std::uint8_t>&, Volume<std::uint8_t>&);
template Volume<float> pad_or_center_crop(const Volume<float>&, PatchSize);
template Volume<std::uint8_t> pad_or_center_crop(const Volume<std::uint8_t>&, PatchSize);

}  // namespace cmr
