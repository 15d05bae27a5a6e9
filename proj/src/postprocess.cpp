#include "cmr/postprocess.hpp"

#include <algorithm>
#include <deque>

namespace cmr {

namespace {

struct Offset {
  long dx, dy, dz;
};

std::vector<Offset> neighbourhood(int connectivity, bool is3d) {
  std::vector<Offset> out;
  const long zr = is3d ? 1 : 0;
  for (long dz = -zr; dz <= zr; ++dz) {
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const int manhattan = static_cast<int>(std::abs(dx) + std::abs(dy) + std::abs(dz));
        if (manhattan == 0) continue;
        if ((connectivity == 4 || connectivity == 6) && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

}  // namespace

ComponentLabeling connected_components(std::span<const std::uint8_t> mask, Dims3 dims,
                                       int connectivity) {
  const bool is3d = dims[2] > 1;
  const bool ok = is3d ? (connectivity == 6 || connectivity == 26)
                       : (connectivity == 4 || connectivity == 8);
  if (!ok) {
    fail(ErrorCode::kArgument, "connectivity " + std::to_string(connectivity) +
                                   " is not valid for a " + (is3d ? "3D" : "2D") + " grid");
  }
  if (mask.size() != dims[0] * dims[1] * dims[2]) {
    fail(ErrorCode::kArgument, "mask length does not match dims");
  }
  const int conn = connectivity;
  const auto nbrs = neighbourhood(conn, is3d);

  ComponentLabeling out;
  out.dims = dims;
  out.ids.assign(mask.size(), 0);
  const long nx = static_cast<long>(dims[0]);
  const long ny = static_cast<long>(dims[1]);
  const long nz = static_cast<long>(dims[2]);
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || out.ids[start] != 0) continue;
    const auto id = static_cast<std::uint32_t>(out.sizes.size() + 1);
    std::size_t size = 0;
    out.ids[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      ++size;
      const long x = static_cast<long>(cur % dims[0]);
      const long y = static_cast<long>((cur / dims[0]) % dims[1]);
      const long z = static_cast<long>(cur / (dims[0] * dims[1]));
      for (const auto& o : nbrs) {
        const long u = x + o.dx;
        const long v = y + o.dy;
        const long w = z + o.dz;
        if (u < 0 || v < 0 || w < 0 || u >= nx || v >= ny || w >= nz) continue;
        const auto idx = static_cast<std::size_t>((w * ny + v) * nx + u);
        if (mask[idx] && out.ids[idx] == 0) {
          out.ids[idx] = id;
          queue.push_back(idx);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

ComponentLabeling connected_components(const Mask2& mask, int connectivity) {
  return connected_components(mask.values(), {mask.nx(), mask.ny(), 1}, connectivity);
}

std::vector<std::uint8_t> keep_largest(std::span<const std::uint8_t> mask, Dims3 dims,
                                       int connectivity) {
  const auto cc = connected_components(mask, dims, connectivity);
  std::vector<std::uint8_t> out(mask.size(), 0);
  if (cc.count() == 0) return out;
  std::size_t best = 0;
  for (std::size_t i = 1; i < cc.count(); ++i) {
    if (cc.sizes[i] > cc.sizes[best]) best = i;
  }
  const auto keep = static_cast<std::uint32_t>(best + 1);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = cc.ids[i] == keep ? 1 : 0;
  return out;
}

Mask2 keep_largest(const Mask2& mask, int connectivity) {
  return Mask2(mask.nx(), mask.ny(),
               keep_largest(mask.values(), {mask.nx(), mask.ny(), 1}, connectivity));
}

namespace {

// Background pixels 4-connected to the border.
Mask2 outside_region(const Mask2& mask) {
  const std::size_t nx = mask.nx();
  const std::size_t ny = mask.ny();
  Mask2 outside(nx, ny, 0);
  std::deque<std::pair<std::size_t, std::size_t>> queue;
  auto seed = [&](std::size_t x, std::size_t y) {
    if (mask(x, y) == 0 && outside(x, y) == 0) {
      outside(x, y) = 1;
      queue.emplace_back(x, y);
    }
  };
  for (std::size_t x = 0; x < nx; ++x) {
    seed(x, 0);
    seed(x, ny - 1);
  }
  for (std::size_t y = 0; y < ny; ++y) {
    seed(0, y);
    seed(nx - 1, y);
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < nx) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < ny) seed(x, y + 1);
  }
  return outside;
}

}  // namespace

Mask2 fill_holes(const Mask2& mask) {
  if (mask.empty()) return mask;
  const Mask2 outside = outside_region(mask);
  Mask2 out(mask.nx(), mask.ny(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.values()[i] = (mask.values()[i] || !outside.values()[i]) ? 1 : 0;
  }
  return out;
}

namespace {

constexpr std::uint8_t kBG = LabelSchema::kBackground;
constexpr std::uint8_t kOrder[3] = {LabelSchema::kLV, LabelSchema::kMYO, LabelSchema::kRV};

void fill_class_holes(Image<std::uint8_t>& s, std::uint8_t cls) {
  Mask2 m(s.nx(), s.ny(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) m.values()[i] = s.values()[i] == cls;
  const Mask2 filled = fill_holes(m);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (filled.values()[i] && s.values()[i] == kBG) s.values()[i] = cls;
  }
}

void fill_myo_holes(Image<std::uint8_t>& s) {
  Mask2 m(s.nx(), s.ny(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) m.values()[i] = s.values()[i] == LabelSchema::kMYO;
  const Mask2 outside = outside_region(m);
  Mask2 holes(s.nx(), s.ny(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) holes.values()[i] = !m.values()[i] && !outside.values()[i];
  const auto cc = connected_components(holes, 4);
  std::vector<bool> has_lv(cc.count() + 1, false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (cc.ids[i] && s.values()[i] == LabelSchema::kLV) has_lv[cc.ids[i]] = true;
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (cc.ids[i] && s.values()[i] == kBG) {
      s.values()[i] = has_lv[cc.ids[i]] ? LabelSchema::kLV : LabelSchema::kMYO;
    }
  }
}

void postprocess_frame(LabelVolume& v, std::size_t t, const PostprocessOptions& o) {
  const std::size_t nx = v.nx();
  const std::size_t ny = v.ny();
  const std::size_t nz = v.nz();
  const std::size_t n3 = nx * ny * nz;
  auto frame = v.values().subspan(t * n3, n3);
  for (const std::uint8_t cls : kOrder) {
    if (o.largest_3d) {
      std::vector<std::uint8_t> m(n3);
      for (std::size_t i = 0; i < n3; ++i) m[i] = frame[i] == cls;
      const auto keep = keep_largest(m, {nx, ny, nz}, nz > 1 ? 26 : 8);
      for (std::size_t i = 0; i < n3; ++i) {
        if (m[i] && !keep[i]) frame[i] = kBG;
      }
    }
    if (o.largest_2d) {
      const std::size_t n2 = nx * ny;
      for (std::size_t z = 0; z < nz; ++z) {
        auto sl = frame.subspan(z * n2, n2);
        std::vector<std::uint8_t> m(n2);
        for (std::size_t i = 0; i < n2; ++i) m[i] = sl[i] == cls;
        const auto keep = keep_largest(m, {nx, ny, 1}, 8);
        for (std::size_t i = 0; i < n2; ++i) {
          if (m[i] && !keep[i]) sl[i] = kBG;
        }
      }
    }
  }
  if (o.fill) {
    for (std::size_t z = 0; z < nz; ++z) {
      Image<std::uint8_t> s = v.slice(z, t);
      fill_class_holes(s, LabelSchema::kLV);
      fill_myo_holes(s);
      fill_class_holes(s, LabelSchema::kRV);
      v.set_slice(z, t, s);
    }
  }
}

}  // namespace

LabelVolume postprocess_labels(const LabelVolume& lbl, const PostprocessOptions& opts) {
  validate_labels(lbl, LabelSchema{});
  LabelVolume cur = lbl;
  for (std::size_t t = 0; t < cur.nt(); ++t) {
    for (int round = 0; round < std::max(1, opts.max_rounds); ++round) {
      const LabelVolume before = cur;
      postprocess_frame(cur, t, opts);
      if (cur == before) break;
    }
  }
  return cur;
}

}  // namespace cmr
