#include "cmr/edges.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace cmr {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

long clamp_index(long i, std::size_t n) {
  return std::clamp(i, 0L, static_cast<long>(n) - 1);
}

}  // namespace

Image<double> gaussian_smooth(const Image<double>& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const long r = static_cast<long>(k.size() / 2);
  const std::size_t nx = img.nx();
  const std::size_t ny = img.ny();
  Image<double> tmp(nx, ny);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] *
               img(static_cast<std::size_t>(clamp_index(static_cast<long>(x) + i, nx)), y);
      }
      tmp(x, y) = acc;
    }
  }
  Image<double> out(nx, ny);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] *
               tmp(x, static_cast<std::size_t>(clamp_index(static_cast<long>(y) + i, ny)));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

Mask2 canny_edges(const Image<double>& img, double sigma, double low, double high) {
  if (!(sigma > 0.0)) fail(ErrorCode::kArgument, "canny sigma must be positive");
  if (!(low >= 0.0 && low <= high && high <= 1.0)) {
    fail(ErrorCode::kArgument, "canny thresholds must satisfy 0 <= low <= high <= 1");
  }
  const std::size_t nx = img.nx();
  const std::size_t ny = img.ny();
  Mask2 edges(nx, ny, 0);
  if (img.empty()) return edges;

  const Image<double> s = gaussian_smooth(img, sigma);
  auto at = [&](long x, long y) {
    return s(static_cast<std::size_t>(clamp_index(x, nx)),
             static_cast<std::size_t>(clamp_index(y, ny)));
  };

  Image<double> mag(nx, ny);
  Image<std::uint8_t> dir(nx, ny);
  double gmax = 0.0;
  for (std::size_t yy = 0; yy < ny; ++yy) {
    for (std::size_t xx = 0; xx < nx; ++xx) {
      const long x = static_cast<long>(xx);
      const long y = static_cast<long>(yy);
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const double m = std::hypot(gx, gy);
      mag(xx, yy) = m;
      gmax = std::max(gmax, m);
      // Quantise direction into 0, 45, 90, 135 degrees.
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      std::uint8_t d = 0;
      if (angle >= 22.5 && angle < 67.5) {
        d = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        d = 2;
      } else if (angle >= 112.5 && angle < 157.5) {
        d = 3;
      }
      dir(xx, yy) = d;
    }
  }
  if (gmax <= 0.0) return edges;

  // Step toward the "forward" neighbour for each direction bin.
  static constexpr long kDx[4] = {1, 1, 0, -1};
  static constexpr long kDy[4] = {0, 1, 1, 1};
  auto mag_at = [&](long x, long y) {
    return mag.inside(x, y) ? mag(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) : 0.0;
  };

  Image<double> nms(nx, ny, 0.0);
  for (std::size_t yy = 0; yy < ny; ++yy) {
    for (std::size_t xx = 0; xx < nx; ++xx) {
      const double m = mag(xx, yy);
      if (m <= 0.0) continue;
      const auto d = dir(xx, yy);
      const long x = static_cast<long>(xx);
      const long y = static_cast<long>(yy);
      const double fwd = mag_at(x + kDx[d], y + kDy[d]);
      const double bwd = mag_at(x - kDx[d], y - kDy[d]);
      if (m > bwd && m >= fwd) nms(xx, yy) = m;
    }
  }

  const double hi = high * gmax;
  const double lo = low * gmax;
  std::deque<std::pair<long, long>> queue;
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      if (nms(x, y) > 0.0 && nms(x, y) >= hi) {
        edges(x, y) = 1;
        queue.emplace_back(static_cast<long>(x), static_cast<long>(y));
      }
    }
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const long u = x + dx;
        const long v = y + dy;
        if (!edges.inside(u, v)) continue;
        const auto ux = static_cast<std::size_t>(u);
        const auto vy = static_cast<std::size_t>(v);
        if (edges(ux, vy) == 0 && nms(ux, vy) > 0.0 && nms(ux, vy) >= lo) {
          edges(ux, vy) = 1;
          queue.emplace_back(u, v);
        }
      }
    }
  }
  return edges;
}

Mask2 dilate_cross(const Mask2& mask, int iterations) {
  Mask2 cur = mask;
  for (int it = 0; it < iterations; ++it) {
    Mask2 next = cur;
    for (std::size_t y = 0; y < cur.ny(); ++y) {
      for (std::size_t x = 0; x < cur.nx(); ++x) {
        if (cur(x, y) == 0) continue;
        if (x > 0) next(x - 1, y) = 1;
        if (x + 1 < cur.nx()) next(x + 1, y) = 1;
        if (y > 0) next(x, y - 1) = 1;
        if (y + 1 < cur.ny()) next(x, y + 1) = 1;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

Mask2 inner_boundary(const Mask2& mask) {
  Mask2 out(mask.nx(), mask.ny(), 0);
  static constexpr long kN[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (std::size_t y = 0; y < mask.ny(); ++y) {
    for (std::size_t x = 0; x < mask.nx(); ++x) {
      if (mask(x, y) == 0) continue;
      for (const auto& n : kN) {
        const long u = static_cast<long>(x) + n[0];
        const long v = static_cast<long>(y) + n[1];
        if (mask.inside(u, v) &&
            mask(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) == 0) {
          out(x, y) = 1;
          break;
        }
      }
    }
  }
  return out;
}

Mask2 thin(const Mask2& mask) {
  Mask2 img = mask;
  const long nx = static_cast<long>(img.nx());
  const long ny = static_cast<long>(img.ny());
  auto px = [&](long x, long y) -> int {
    return img.inside(x, y) && img(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) ? 1 : 0;
  };
  bool changed = true;
  std::vector<std::pair<long, long>> kill;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (long y = 0; y < ny; ++y) {
        for (long x = 0; x < nx; ++x) {
          if (!px(x, y)) continue;
          // P2..P9 clockwise starting north.
          const int p[8] = {px(x, y - 1), px(x + 1, y - 1), px(x + 1, y), px(x + 1, y + 1),
                            px(x, y + 1), px(x - 1, y + 1), px(x - 1, y), px(x - 1, y - 1)};
          int b = 0;
          int a = 0;
          for (int i = 0; i < 8; ++i) {
            b += p[i];
            if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          if (pass == 0) {
            if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
          } else {
            if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
          }
          kill.emplace_back(x, y);
        }
      }
      for (const auto& [x, y] : kill) img(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = 0;
      if (!kill.empty()) changed = true;
    }
  }
  return img;
}

Mask2 region_contour(const Mask2& region, double sigma) {
  const Mask2 edges = canny_edges(to_real(region), sigma, 0.1, 0.2);
  const Mask2 near = dilate_cross(edges, 1);
  Mask2 contour = inner_boundary(region);
  for (std::size_t i = 0; i < contour.size(); ++i) {
    contour.values()[i] = static_cast<std::uint8_t>(contour.values()[i] && near.values()[i]);
  }
  return thin(contour);
}

std::size_t count_nonzero(const Mask2& mask) noexcept {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](auto v) { return v != 0; }));
}

Image<double> to_real(const Mask2& mask) {
  Image<double> out(mask.nx(), mask.ny());
  for (std::size_t i = 0; i < mask.size(); ++i) out.values()[i] = mask.values()[i] ? 1.0 : 0.0;
  return out;
}

}  // namespace cmr
