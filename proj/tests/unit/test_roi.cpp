#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "cmr/edges.hpp"
#include "cmr/phantom.hpp"
#include "cmr/roi.hpp"

using namespace cmr;

namespace {

ScalarVolume series(std::size_t nt, auto&& f) {
  ScalarVolume v({1, 1, 1, nt}, {1, 1, 1, 1});
  for (std::size_t t = 0; t < nt; ++t) v(0, 0, 0, t) = static_cast<float>(f(static_cast<double>(t)));
  return v;
}

Mask2 ring(std::size_t n, double cx, double cy, double r) {
  Mask2 m(n, n, 0);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) m(x, y) = std::abs(std::hypot(x - cx, y - cy) - r) < 0.5;
  }
  return m;
}

}  // namespace

TEST_CASE("H1 of constant, fundamental and second harmonic") {
  const double T = 30.0;
  CHECK(temporal_h1(series(30, [](double) { return 7.0; }))(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  const double fund = temporal_h1(series(30, [&](double t) { return std::cos(2 * std::numbers::pi * t / T); }))(0, 0, 0);
  CHECK(std::abs(fund - 15.0) / 15.0 < 1e-6);  // float storage limits precision here
  const double h2 = temporal_h1(series(30, [&](double t) { return std::cos(4 * std::numbers::pi * t / T); }))(0, 0, 0);
  CHECK(h2 < 1e-5);
  CHECK_THROWS_AS(temporal_h1(series(1, [](double) { return 1.0; })), Error);
}

TEST_CASE("double-precision H1 series") {
  for (std::size_t n : {8u, 30u, 31u}) {
    std::vector<double> f(n), g(n);
    for (std::size_t t = 0; t < n; ++t) {
      f[t] = std::cos(2 * std::numbers::pi * t / n);
      g[t] = std::cos(4 * std::numbers::pi * t / n);
    }
    CHECK(std::abs(h1_magnitude(f) - n / 2.0) / (n / 2.0) < 1e-9);
    CHECK(h1_magnitude(g) < 1e-9);
  }
}

TEST_CASE("H1 denoising threshold is strict") {
  H1Volume h({3, 1, 1, 1}, {1, 1, 1, 1}, std::vector<double>{100.0, 0.5, 1.0});
  const auto d = denoise_h1(h, 0.01);
  CHECK(d(0, 0, 0) == 100.0);
  CHECK(d(1, 0, 0) == 0.0);
  CHECK(d(2, 0, 0) == 1.0);
  H1Volume z({2, 2, 1, 1}, {1, 1, 1, 1});
  CHECK(denoise_h1(z, 0.01) == z);
}

TEST_CASE("Canny on constants, steps and disks") {
  CHECK(count_nonzero(canny_edges(Image<double>(20, 20, 3.0), 1.0, 0.1, 0.2)) == 0);

  Image<double> step(20, 20, 0.0);
  for (std::size_t y = 0; y < 20; ++y) {
    for (std::size_t x = 10; x < 20; ++x) step(x, y) = 1.0;
  }
  const Mask2 e = canny_edges(step, 1.0, 0.1, 0.2);
  for (std::size_t y = 3; y < 17; ++y) {
    int n = 0;
    for (std::size_t x = 0; x < 20; ++x) n += e(x, y);
    CHECK(n == 1);
  }

  const Mask2 d = oracle::disk(48, 48, 24, 24, 10);
  const Mask2 de = canny_edges(to_real(d), 1.0, 0.1, 0.2);
  CHECK(count_nonzero(de) > 40);
  for (std::size_t y = 0; y < 48; ++y) {
    for (std::size_t x = 0; x < 48; ++x) {
      if (de(x, y)) CHECK(std::abs(std::hypot(x - 24.0, y - 24.0) - 10.0) <= 1.0);
    }
  }
}

TEST_CASE("Hough finds single and concentric rings") {
  RoiConfig cfg;
  const auto one = hough_circles(ring(80, 40, 40, 12), cfg);
  REQUIRE(!one.empty());
  CHECK(std::abs(one[0].center.x - 40) <= 1);
  CHECK(std::abs(one[0].center.y - 40) <= 1);
  CHECK(std::abs(one[0].radius - 12) <= 1);

  CHECK(hough_circles(Mask2(80, 80, 0), cfg).empty());

  Mask2 two = ring(80, 40, 40, 10);
  const Mask2 outer = ring(80, 40, 40, 14);
  for (std::size_t i = 0; i < two.size(); ++i) two.values()[i] |= outer.values()[i];
  const auto c = hough_circles(two, cfg);
  REQUIRE(c.size() >= 2);
  CHECK(std::hypot(c[0].center.x - c[1].center.x, c[0].center.y - c[1].center.y) <= 1.0);
  CHECK(c[0].radius != c[1].radius);
}

TEST_CASE("vote kernel has unit mass") {
  const auto k = vote_kernel(8.0);
  double s = 0;
  for (double v : k.values()) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("locate_roi on pulsating disks") {
  for (const PixelCoord c : {PixelCoord{64, 64}, PixelCoord{30, 90}}) {
    const auto h = locate_roi(pulsating_disk_cine(c, 11), RoiConfig{});
    CHECK(std::hypot(h.roi_center.x - c.x, h.roi_center.y - c.y) <= 2.0);
  }
  ScalarVolume still({64, 64, 1, 10}, {1, 1, 1, 1});
  for (auto& v : still.values()) v = 0.3f;
  try {
    locate_roi(still, RoiConfig{});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLocate);
  }
}

TEST_CASE("RoiConfig validation") {
  RoiConfig c;
  c.radius_min = 20;
  c.radius_max = 10;
  CHECK_THROWS_AS(c.validate(), Error);
}
