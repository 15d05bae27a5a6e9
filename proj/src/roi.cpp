#include "cmr/roi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <tuple>

#include "cmr/edges.hpp"

namespace cmr {

void RoiConfig::validate() const {
  if (radius_min < 1 || radius_min >= radius_max) {
    fail(ErrorCode::kArgument, "roi: require 1 <= radius_min < radius_max");
  }
  if (top_p < 1) fail(ErrorCode::kArgument, "roi: top_p must be >= 1");
  if (!(vote_sigma > 0.0)) fail(ErrorCode::kArgument, "roi: vote_sigma must be positive");
  if (!(h1_noise_frac >= 0.0 && h1_noise_frac < 1.0)) {
    fail(ErrorCode::kArgument, "roi: h1_noise_frac must be in [0, 1)");
  }
  if (!(canny_sigma > 0.0)) fail(ErrorCode::kArgument, "roi: canny_sigma must be positive");
  if (!(canny_low >= 0.0 && canny_low <= canny_high && canny_high <= 1.0)) {
    fail(ErrorCode::kArgument, "roi: require 0 <= canny_low <= canny_high <= 1");
  }
  if (patch_size.w == 0 || patch_size.h == 0) {
    fail(ErrorCode::kArgument, "roi: patch size must be positive");
  }
}

namespace {

struct Phasors {
  std::vector<double> c, s;
  explicit Phasors(std::size_t nt) : c(nt), s(nt) {
    for (std::size_t t = 0; t < nt; ++t) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(nt);
      c[t] = std::cos(w);
      s[t] = std::sin(w);
    }
  }
  double magnitude(std::span<const double> x) const {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      re += x[t] * c[t];
      im -= x[t] * s[t];
    }
    return std::hypot(re, im);
  }
};

}  // namespace

double h1_magnitude(std::span<const double> series) {
  if (series.size() < 2) fail(ErrorCode::kArgument, "h1_magnitude needs at least 2 samples");
  return Phasors(series.size()).magnitude(series);
}

H1Volume temporal_h1(const ScalarVolume& v) {
  const std::size_t nt = v.nt();
  if (nt < 2) fail(ErrorCode::kArgument, "temporal_h1 needs at least 2 frames, got " + std::to_string(nt));
  const Phasors ph(nt);
  H1Volume out({v.nx(), v.ny(), v.nz(), 1}, {v.spacing()[0], v.spacing()[1], v.spacing()[2], 1.0}, 3);
  const std::size_t nvox = v.nx() * v.ny() * v.nz();
  const auto in = v.values();
  auto dst = out.values();
  std::vector<double> x(nt);
  for (std::size_t i = 0; i < nvox; ++i) {
    for (std::size_t t = 0; t < nt; ++t) x[t] = in[t * nvox + i];
    dst[i] = ph.magnitude(x);
  }
  return out;
}

H1Volume denoise_h1(const H1Volume& h, double frac) {
  if (!(frac >= 0.0 && frac < 1.0)) fail(ErrorCode::kArgument, "denoise_h1: frac must be in [0, 1)");
  H1Volume out = h;
  auto vals = out.values();
  if (vals.empty()) return out;
  const double threshold = frac * *std::max_element(vals.begin(), vals.end());
  for (double& x : vals) {
    if (x < threshold) x = 0.0;
  }
  return out;
}

namespace {

std::vector<std::pair<int, int>> ring_offsets(int r) {
  std::vector<std::pair<int, int>> out;
  for (int dy = -r - 1; dy <= r + 1; ++dy) {
    for (int dx = -r - 1; dx <= r + 1; ++dx) {
      const double d = std::sqrt(static_cast<double>(dx * dx + dy * dy));
      if (std::abs(d - r) < 0.5) out.emplace_back(dx, dy);
    }
  }
  return out;
}

}  // namespace

std::vector<HoughCircle> hough_circles(const Mask2& edges, const RoiConfig& cfg) {
  cfg.validate();
  const long nx = static_cast<long>(edges.nx());
  const long ny = static_cast<long>(edges.ny());
  std::vector<std::pair<long, long>> pts;
  for (long y = 0; y < ny; ++y) {
    for (long x = 0; x < nx; ++x) {
      if (edges(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) pts.emplace_back(x, y);
    }
  }
  if (pts.empty()) return {};

  const int nr = cfg.radius_max - cfg.radius_min + 1;
  const std::size_t plane = static_cast<std::size_t>(nx * ny);
  std::vector<double> score(static_cast<std::size_t>(nr) * plane, 0.0);
  for (int ri = 0; ri < nr; ++ri) {
    const auto offs = ring_offsets(cfg.radius_min + ri);
    double* acc = score.data() + static_cast<std::size_t>(ri) * plane;
    for (const auto& [ex, ey] : pts) {
      for (const auto& [dx, dy] : offs) {
        const long cx = ex - dx;
        const long cy = ey - dy;
        if (cx < 0 || cy < 0 || cx >= nx || cy >= ny) continue;
        acc[static_cast<std::size_t>(cy * nx + cx)] += 1.0;
      }
    }
    const double norm = 1.0 / static_cast<double>(offs.size());
    for (std::size_t i = 0; i < plane; ++i) acc[i] *= norm;
  }

  auto at = [&](int ri, long x, long y) {
    return score[static_cast<std::size_t>(ri) * plane + static_cast<std::size_t>(y * nx + x)];
  };

  // Local maxima in (x, y, r). Plateaus resolve to their first raster voxel.
  std::vector<HoughCircle> cands;
  for (int ri = 0; ri < nr; ++ri) {
    for (long y = 0; y < ny; ++y) {
      for (long x = 0; x < nx; ++x) {
        const double s = at(ri, x, y);
        if (s <= 0.0) continue;
        bool peak = true;
        for (int dr = -1; dr <= 1 && peak; ++dr) {
          const int rr = ri + dr;
          if (rr < 0 || rr >= nr) continue;
          for (long dy = -1; dy <= 1 && peak; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) {
              if (dr == 0 && dy == 0 && dx == 0) continue;
              const long u = x + dx;
              const long v = y + dy;
              if (u < 0 || v < 0 || u >= nx || v >= ny) continue;
              const double o = at(rr, u, v);
              const bool earlier = std::tuple(dr, dy, dx) < std::tuple(0, 0L, 0L);
              if (o > s || (earlier && o == s)) {
                peak = false;
                break;
              }
            }
          }
        }
        if (peak) cands.push_back({{x, y}, cfg.radius_min + ri, s});
      }
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const HoughCircle& a, const HoughCircle& b) { return a.score > b.score; });

  std::vector<HoughCircle> kept;
  const double min_sep2 = static_cast<double>(cfg.radius_min) * cfg.radius_min;
  for (const auto& c : cands) {
    bool duplicate = false;
    for (const auto& k : kept) {
      const double dx = static_cast<double>(c.center.x - k.center.x);
      const double dy = static_cast<double>(c.center.y - k.center.y);
      if (dx * dx + dy * dy < min_sep2 && std::abs(c.radius - k.radius) <= 2) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    kept.push_back(c);
    if (static_cast<int>(kept.size()) == cfg.top_p) break;
  }
  return kept;
}

Image<double> vote_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  const std::size_t n = static_cast<std::size_t>(2 * r + 1);
  Image<double> k(n, n);
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
      k(static_cast<std::size_t>(dx + r), static_cast<std::size_t>(dy + r)) = w;
      total += w;
    }
  }
  for (double& w : k.values()) w /= total;
  return k;
}

HoughResult locate_roi(const ScalarVolume& v, const RoiConfig& cfg) {
  cfg.validate();
  const H1Volume h1 = denoise_h1(temporal_h1(v), cfg.h1_noise_frac);

  HoughResult res;
  res.likelihood = Image<double>(v.nx(), v.ny(), 0.0);
  const Image<double> kernel = vote_kernel(cfg.vote_sigma);
  const long kr = static_cast<long>(kernel.nx() / 2);
  bool any = false;
  for (std::size_t z = 0; z < v.nz(); ++z) {
    const Image<double> slice = h1.slice(z, 0);
    const Mask2 edges = canny_edges(slice, cfg.canny_sigma, cfg.canny_low, cfg.canny_high);
    SliceCircles sc{z, hough_circles(edges, cfg)};
    for (const auto& c : sc.circles) {
      any = true;
      for (long dy = -kr; dy <= kr; ++dy) {
        for (long dx = -kr; dx <= kr; ++dx) {
          const long x = c.center.x + dx;
          const long y = c.center.y + dy;
          if (!res.likelihood.inside(x, y)) continue;
          res.likelihood(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) +=
              c.score * kernel(static_cast<std::size_t>(dx + kr), static_cast<std::size_t>(dy + kr));
        }
      }
    }
    res.per_slice.push_back(std::move(sc));
  }
  if (!any) {
    fail(ErrorCode::kLocate,
         "no Hough circles found on any slice; fall back to the image center");
  }
  double best = -1.0;
  for (std::size_t y = 0; y < v.ny(); ++y) {
    for (std::size_t x = 0; x < v.nx(); ++x) {
      if (res.likelihood(x, y) > best) {
        best = res.likelihood(x, y);
        res.roi_center = {static_cast<long>(x), static_cast<long>(y)};
      }
    }
  }
  return res;
}

}  // namespace cmr
