#include "cmr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace cmr {

namespace {

double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * unit_uniform(gen);
}

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

std::array<double, 4> bspline_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double s = 1.0 - t;
  return {s * s * s / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
          (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0};
}

}  // namespace

AugmentParams sample_params(std::uint64_t seed, bool flips, const AugmentBounds& b) {
  std::mt19937_64 gen(seed);
  AugmentParams p;
  p.angle_deg = uniform(gen, -b.max_angle_deg, b.max_angle_deg);
  p.shift_mm.x = uniform(gen, -b.max_shift_mm, b.max_shift_mm);
  p.shift_mm.y = uniform(gen, -b.max_shift_mm, b.max_shift_mm);
  p.zoom = uniform(gen, b.zoom_min, b.zoom_max);
  for (auto& c : p.elastic_grid) {
    c.x = uniform(gen, -b.max_elastic_mm, b.max_elastic_mm);
    c.y = uniform(gen, -b.max_elastic_mm, b.max_elastic_mm);
  }
  p.noise_sigma = b.noise_sigma;
  p.noise_seed = gen();
  if (flips) {
    p.flip_h = (gen() >> 63) != 0;
    p.flip_v = (gen() >> 63) != 0;
  }
  return p;
}

Vec2 elastic_displacement(const std::array<Vec2, 4>& grid, double u, double v) {
  // Control lattice per axis after replication padding: [c0, c0, c1, c1].
  const auto wu = bspline_weights(std::clamp(u, 0.0, 1.0));
  const auto wv = bspline_weights(std::clamp(v, 0.0, 1.0));
  const double au0 = wu[0] + wu[1];
  const double au1 = wu[2] + wu[3];
  const double av0 = wv[0] + wv[1];
  const double av1 = wv[2] + wv[3];
  const double w00 = au0 * av0;
  const double w10 = au1 * av0;
  const double w01 = au0 * av1;
  const double w11 = au1 * av1;
  return {w00 * grid[0].x + w10 * grid[1].x + w01 * grid[2].x + w11 * grid[3].x,
          w00 * grid[0].y + w10 * grid[1].y + w01 * grid[2].y + w11 * grid[3].y};
}

Augmented apply_augment(const Image<float>& img, const Mask2* labels, const AugmentParams& p,
                        std::array<double, 2> spacing) {
  if (!(spacing[0] > 0.0) || !(spacing[1] > 0.0)) {
    fail(ErrorCode::kArgument, "augment: spacing must be positive");
  }
  if (!(p.zoom > 0.0)) fail(ErrorCode::kArgument, "augment: zoom must be positive");
  if (!(p.noise_sigma >= 0.0)) fail(ErrorCode::kArgument, "augment: noise_sigma must be >= 0");
  if (labels && (labels->nx() != img.nx() || labels->ny() != img.ny())) {
    fail(ErrorCode::kArgument, "augment: image and label dims differ");
  }
  const std::size_t nx = img.nx();
  const std::size_t ny = img.ny();
  const double cx = (static_cast<double>(nx) - 1.0) / 2.0;
  const double cy = (static_cast<double>(ny) - 1.0) / 2.0;
  const double theta = p.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double span_x = nx > 1 ? static_cast<double>(nx - 1) : 1.0;
  const double span_y = ny > 1 ? static_cast<double>(ny - 1) : 1.0;

  Augmented out{Image<float>(nx, ny, 0.0f), std::nullopt};
  if (labels) out.labels = Mask2(nx, ny, 0);

  auto sample_image = [&](double x, double y) -> float {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double ax = x - fx;
    const double ay = y - fy;
    const long x0 = static_cast<long>(fx);
    const long y0 = static_cast<long>(fy);
    auto px = [&](long u, long v) -> double {
      return img.inside(u, v) ? img(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) : 0.0;
    };
    if (ax == 0.0 && ay == 0.0) return static_cast<float>(px(x0, y0));
    const double top = (1.0 - ax) * px(x0, y0) + ax * px(x0 + 1, y0);
    const double bot = (1.0 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1);
    return static_cast<float>((1.0 - ay) * top + ay * bot);
  };

  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      // Output position in mm about the centre.
      const double ox = (static_cast<double>(i) - cx) * spacing[0];
      const double oy = (static_cast<double>(j) - cy) * spacing[1];
      // Undo rotation.
      const double rx = c * ox + s * oy;
      const double ry = -s * ox + c * oy;
      // Undo shift, then zoom.
      const double zx = (rx - p.shift_mm.x) / p.zoom;
      const double zy = (ry - p.shift_mm.y) / p.zoom;
      // Elastic displacement, looked up at the pre-elastic position.
      const double u = (zx / spacing[0] + cx) / span_x;
      const double v = (zy / spacing[1] + cy) / span_y;
      const Vec2 d = elastic_displacement(p.elastic_grid, u, v);
      const double sx = snap((zx + d.x) / spacing[0] + cx);
      const double sy = snap((zy + d.y) / spacing[1] + cy);

      std::size_t di = p.flip_h ? nx - 1 - i : i;
      std::size_t dj = p.flip_v ? ny - 1 - j : j;
      out.image(di, dj) = sample_image(sx, sy);
      if (labels) {
        const long lx = static_cast<long>(std::round(sx));
        const long ly = static_cast<long>(std::round(sy));
        (*out.labels)(di, dj) = labels->inside(lx, ly)
                                    ? (*labels)(static_cast<std::size_t>(lx), static_cast<std::size_t>(ly))
                                    : std::uint8_t{0};
      }
    }
  }

  if (p.noise_sigma > 0.0) {
    std::mt19937_64 gen(p.noise_seed);
    std::normal_distribution<double> noise(0.0, p.noise_sigma);
    for (float& x : out.image.values()) x = static_cast<float>(x + noise(gen));
  }
  return out;
}

}  // namespace cmr
