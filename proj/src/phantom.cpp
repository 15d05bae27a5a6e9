#include "cmr/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmr/numeric.hpp"
#include "cmr/rng.hpp"

namespace cmr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smooth texture in [lo, hi]: a few random plane waves.
Image<float> texture(std::size_t nx, std::size_t ny, Rng& g, double lo, double hi) {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    waves.push_back({uniform(g, -0.25, 0.25), uniform(g, -0.25, 0.25), uniform(g, 0.0, kTwoPi),
                     uniform(g, 0.5, 1.0)});
  }
  Image<double> t(nx, ny, 0.0);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      double s = 0.0;
      for (const auto& w : waves) s += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      t(x, y) = s;
    }
  }
  const auto [mn, mx] = std::minmax_element(t.values().begin(), t.values().end());
  const double a = *mn;
  const double b = *mx;
  Image<float> out(nx, ny, 0.0f);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = b > a ? (t.values()[i] - a) / (b - a) : 0.0;
    out.values()[i] = static_cast<float>(lo + (hi - lo) * u);
  }
  return out;
}

}  // namespace

ScalarVolume pulsating_disk_cine(PixelCoord center, std::uint64_t seed, const DiskCineOptions& o) {
  if (o.nt < 2 || o.nx == 0 || o.ny == 0 || o.nz == 0) fail(ErrorCode::kArgument, "disk cine: bad dims");
  if (!(o.r_min > 0.0 && o.r_max >= o.r_min)) fail(ErrorCode::kArgument, "disk cine: bad radii");
  Rng g(seed);
  const Image<float> bg = texture(o.nx, o.ny, g, 0.1, 0.4);
  ScalarVolume v({o.nx, o.ny, o.nz, o.nt}, {o.spacing_mm, o.spacing_mm, 8.0, 1.0}, 4);
  Rng noise(splitmix64(seed));
  for (std::size_t t = 0; t < o.nt; ++t) {
    const double phase = kTwoPi * static_cast<double>(t) / static_cast<double>(o.nt);
    const double r = o.r_min + (o.r_max - o.r_min) * 0.5 * (1.0 + std::cos(phase));
    for (std::size_t z = 0; z < o.nz; ++z) {
      for (std::size_t y = 0; y < o.ny; ++y) {
        for (std::size_t x = 0; x < o.nx; ++x) {
          const double d = std::hypot(static_cast<double>(x) - center.x, static_cast<double>(y) - center.y);
          double val = d < r ? o.disk_intensity : bg(x, y);
          if (o.noise_sigma > 0.0) val += o.noise_sigma * normal01(noise);
          v(x, y, z, t) = static_cast<float>(val);
        }
      }
    }
  }
  return v;
}

double WallProfile::at(double theta) const {
  if (thickness_px.empty()) fail(ErrorCode::kArgument, "wall profile has no samples");
  const auto n = thickness_px.size();
  double u = theta / kTwoPi;
  u -= std::floor(u);
  const double pos = u * static_cast<double>(n);
  const auto i0 = static_cast<std::size_t>(pos) % n;
  const auto i1 = (i0 + 1) % n;
  const double f = pos - std::floor(pos);
  return thickness_px[i0] * (1.0 - f) + thickness_px[i1] * f;
}

double WallProfile::mean() const { return *mean_of(thickness_px); }

namespace {

void render_into(LabelVolume& v, std::size_t t, const HeartPhantomSpec& s, const HeartGeometry& g) {
  const double wall_mean = g.wall.mean();
  for (std::size_t z = 0; z < s.nz; ++z) {
    const double scale = std::max(0.2, 1.0 - s.taper * static_cast<double>(z));
    const double lv_r = g.lv_radius * scale;
    const double rv_r = g.rv_radius * scale;
    const double rv_cx = s.cx - (lv_r + wall_mean + 0.6 * rv_r);
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const double dx = static_cast<double>(x) - s.cx;
        const double dy = static_cast<double>(y) - s.cy;
        const double d = std::hypot(dx, dy);
        const double epi = lv_r + g.wall.at(std::atan2(dy, dx));
        std::uint8_t lbl = LabelSchema::kBackground;
        if (d < lv_r) {
          lbl = LabelSchema::kLV;
        } else if (d < epi) {
          lbl = LabelSchema::kMYO;
        } else if (std::hypot(static_cast<double>(x) - rv_cx, dy) < rv_r) {
          lbl = LabelSchema::kRV;
        }
        v(x, y, z, t) = lbl;
      }
    }
  }
}

HeartGeometry lerp(const HeartGeometry& a, const HeartGeometry& b, double s) {
  if (a.wall.thickness_px.size() != b.wall.thickness_px.size()) {
    fail(ErrorCode::kArgument, "ED and ES wall profiles need the same number of samples");
  }
  HeartGeometry g;
  g.lv_radius = a.lv_radius + (b.lv_radius - a.lv_radius) * s;
  g.rv_radius = a.rv_radius + (b.rv_radius - a.rv_radius) * s;
  for (std::size_t i = 0; i < a.wall.thickness_px.size(); ++i) {
    const double ta = a.wall.thickness_px[i];
    g.wall.thickness_px.push_back(ta + (b.wall.thickness_px[i] - ta) * s);
  }
  return g;
}

void check_spec(const HeartPhantomSpec& s) {
  if (s.nx == 0 || s.ny == 0 || s.nz == 0) fail(ErrorCode::kArgument, "heart phantom: empty grid");
  for (const auto* g : {&s.ed, &s.es}) {
    if (g->wall.thickness_px.empty()) fail(ErrorCode::kArgument, "heart phantom: empty wall profile");
    if (!(g->lv_radius > 0.0 && g->rv_radius >= 0.0)) fail(ErrorCode::kArgument, "heart phantom: bad radii");
  }
}

}  // namespace

LabelVolume render_heart(const HeartPhantomSpec& spec, const HeartGeometry& g) {
  check_spec(spec);
  LabelVolume v({spec.nx, spec.ny, spec.nz, 1}, spec.spacing, 3);
  render_into(v, 0, spec, g);
  return v;
}

PhaseLabels heart_phases(const HeartPhantomSpec& spec) {
  return {render_heart(spec, spec.ed), render_heart(spec, spec.es), std::nullopt, std::nullopt};
}

std::vector<CohortCase> mwt_cohort(std::size_t n, std::uint64_t seed) {
  constexpr std::size_t kSectors = 36;
  Rng g(seed);
  std::vector<CohortCase> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool minf = i % 2 == 1;
    HeartPhantomSpec s;
    s.cx = 48.0 + uniform(g, -2.0, 2.0);
    s.cy = 48.0 + uniform(g, -2.0, 2.0);
    s.ed.lv_radius = uniform(g, 13.0, 17.0);
    s.es.lv_radius = s.ed.lv_radius * uniform(g, 0.6, 0.85);
    s.ed.rv_radius = uniform(g, 11.0, 15.0);
    s.es.rv_radius = s.ed.rv_radius * uniform(g, 0.6, 0.85);

    // Same mean wall thickness distribution for both groups.
    const double mean_ed = uniform(g, 3.0, 5.0);
    const double thicken = uniform(g, 1.2, 1.45);
    std::vector<double> base(kSectors, 1.0);
    if (minf) {
      const double frac = uniform(g, 0.22, 0.33);
      const double depth = uniform(g, 0.3, 0.45);  // thin sector relative to the mean
      const auto width = static_cast<std::size_t>(std::lround(frac * kSectors));
      const auto start = static_cast<std::size_t>(uniform_index(g, kSectors));
      const double rest = (1.0 - static_cast<double>(width) / kSectors * depth) /
                          (1.0 - static_cast<double>(width) / kSectors);
      for (std::size_t k = 0; k < kSectors; ++k) base[k] = rest;
      for (std::size_t k = 0; k < width; ++k) base[(start + k) % kSectors] = depth;
    }
    for (std::size_t k = 0; k < kSectors; ++k) {
      const double jitter = 1.0 + uniform(g, -0.05, 0.05);
      s.ed.wall.thickness_px.push_back(std::max(1.5, mean_ed * base[k] * jitter));
      s.es.wall.thickness_px.push_back(std::max(1.5, mean_ed * thicken * base[k] * jitter));
    }
    out.push_back({s, minf ? Disease::kMINF : Disease::kDCM});
  }
  return out;
}

PhantomCase phantom_case(const HeartPhantomSpec& spec, std::size_t nt, std::uint64_t seed) {
  check_spec(spec);
  if (nt < 2) fail(ErrorCode::kArgument, "phantom cine needs at least two frames");
  Rng g(seed);
  const Image<float> bg = texture(spec.nx, spec.ny, g, 0.05, 0.3);
  PhantomCase pc;
  pc.ed_frame = 0;
  pc.es_frame = nt / 2;
  pc.lv_center = {std::lround(spec.cx), std::lround(spec.cy)};
  pc.cine = ScalarVolume({spec.nx, spec.ny, spec.nz, nt}, spec.spacing, 4);
  LabelVolume frames({spec.nx, spec.ny, spec.nz, nt}, spec.spacing, 4);
  for (std::size_t t = 0; t < nt; ++t) {
    const double s = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(t) / static_cast<double>(nt)));
    render_into(frames, t, spec, lerp(spec.ed, spec.es, s));
  }
  const float level[4] = {0.0f, 0.85f, 0.35f, 1.0f};  // BG (texture), RV, MYO, LV
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t z = 0; z < spec.nz; ++z) {
      for (std::size_t y = 0; y < spec.ny; ++y) {
        for (std::size_t x = 0; x < spec.nx; ++x) {
          const auto l = frames(x, y, z, t);
          pc.cine(x, y, z, t) = l == LabelSchema::kBackground ? bg(x, y) : level[l];
        }
      }
    }
  }
  pc.ed = render_heart(spec, spec.ed);
  pc.es = render_heart(spec, spec.es);
  return pc;
}

HeartPhantomSpec default_heart() {
  HeartPhantomSpec s;
  s.ed.lv_radius = 15.0;
  s.es.lv_radius = 10.5;
  s.ed.rv_radius = 13.0;
  s.es.rv_radius = 9.0;
  for (int k = 0; k < 36; ++k) {
    s.ed.wall.thickness_px.push_back(4.0);
    s.es.wall.thickness_px.push_back(5.5);
  }
  return s;
}

}  // namespace cmr
