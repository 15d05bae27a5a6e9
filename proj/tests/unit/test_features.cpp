#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../oracles.hpp"
#include "cmr/features.hpp"
#include "cmr/phantom.hpp"

using namespace cmr;

namespace {

constexpr double kPi = std::numbers::pi;

Image<std::uint8_t> annulus(std::size_t n, double cx, double cy, double r_in, double r_out) {
  Image<std::uint8_t> s(n, n, 0);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      s(x, y) = d < r_in ? LabelSchema::kLV : d < r_out ? LabelSchema::kMYO : 0;
    }
  }
  return s;
}

Image<std::uint8_t> rotate90(const Image<std::uint8_t>& a) {
  Image<std::uint8_t> r(a.ny(), a.nx(), 0);
  for (std::size_t y = 0; y < a.ny(); ++y) {
    for (std::size_t x = 0; x < a.nx(); ++x) r(a.ny() - 1 - y, x) = a(x, y);
  }
  return r;
}

// Area of the intersection of two disks with centre distance d.
double lens(double r1, double r2, double d) {
  if (d >= r1 + r2) return 0.0;
  if (d <= std::abs(r1 - r2)) return kPi * std::min(r1, r2) * std::min(r1, r2);
  const double a = r1 * r1 * std::acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1));
  const double b = r2 * r2 * std::acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2));
  const double c = 0.5 * std::sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2));
  return a + b - c;
}

struct Analytic {
  double lv = 0, myo = 0, rv = 0;  // mL
};

Analytic analytic_volumes(const HeartPhantomSpec& s, const HeartGeometry& g) {
  Analytic a;
  const double px_ml = s.spacing[0] * s.spacing[1] * s.spacing[2] / 1000.0;
  const double w = g.wall.mean();
  for (std::size_t z = 0; z < s.nz; ++z) {
    const double scale = std::max(0.2, 1.0 - s.taper * z);
    const double lv_r = g.lv_radius * scale;
    const double rv_r = g.rv_radius * scale;
    const double epi = lv_r + w;
    a.lv += kPi * lv_r * lv_r * px_ml;
    a.myo += kPi * (epi * epi - lv_r * lv_r) * px_ml;
    a.rv += (kPi * rv_r * rv_r - lens(rv_r, epi, epi + 0.6 * rv_r)) * px_ml;
  }
  return a;
}

// Lattice-point count of the same geometry: pixel centres strictly inside
// each boundary, evaluated from the circle parameters alone.
Analytic lattice_volumes(const HeartPhantomSpec& s, const HeartGeometry& g) {
  Analytic a;
  const double px_ml = s.spacing[0] * s.spacing[1] * s.spacing[2] / 1000.0;
  const double w = g.wall.mean();
  for (std::size_t z = 0; z < s.nz; ++z) {
    const double scale = std::max(0.2, 1.0 - s.taper * z);
    const double lv_r = g.lv_radius * scale;
    const double rv_r = g.rv_radius * scale;
    const double rv_cx = s.cx - (lv_r + w + 0.6 * rv_r);
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const double d = std::hypot(x - s.cx, y - s.cy);
        if (d < lv_r) {
          a.lv += px_ml;
        } else if (d < lv_r + w) {
          a.myo += px_ml;
        } else if (std::hypot(x - rv_cx, y - s.cy) < rv_r) {
          a.rv += px_ml;
        }
      }
    }
  }
  return a;
}

}  // namespace

TEST_CASE("class volumes") {
  LabelVolume v({10, 10, 10, 1}, {1, 1, 1, 1}, 3);
  for (auto& x : v.values()) x = LabelSchema::kLV;
  CHECK(class_volume_ml(v, LabelSchema::kLV) == doctest::Approx(1.0));
  CHECK(class_volume_ml(v, LabelSchema::kRV) == 0.0);
  LabelVolume w({10, 10, 1, 1}, {1.5, 1.5, 8, 1}, 3);
  for (auto& x : w.values()) x = LabelSchema::kMYO;
  CHECK(class_volume_ml(w, LabelSchema::kMYO) == doctest::Approx(1.8));
}

TEST_CASE("myocardial mass") {
  LabelVolume v({100, 100, 10, 1}, {1, 1, 1, 1}, 3);
  for (auto& x : v.values()) x = LabelSchema::kMYO;
  CHECK(myo_mass_g(v) == doctest::Approx(105.0));
  CHECK(myo_mass_g(v, 1.0) == doctest::Approx(class_volume_ml(v, LabelSchema::kMYO)));
  LabelVolume e({4, 4, 1, 1}, {1, 1, 1, 1}, 3);
  CHECK(myo_mass_g(e) == 0.0);
}

TEST_CASE("ejection fraction") {
  CHECK(*ejection_fraction(100, 50) == 0.5);
  CHECK(*ejection_fraction(80, 80) == 0.0);
  CHECK(*ejection_fraction(80, 0) == 1.0);
  CHECK(!ejection_fraction(0, 0));
}

TEST_CASE("annulus wall thickness") {
  const auto s = annulus(48, 23.6, 24.3, 8, 12);
  const auto m = mwt_slice(s, 1.5, 1.5);
  REQUIRE(m);
  CHECK(std::abs(m->mean - 6.0) <= 1.5);
  for (double t : m->thickness) CHECK(t > 0.0);

  const auto r = mwt_slice(rotate90(s), 1.5, 1.5);
  REQUIRE(r);
  CHECK(std::abs(r->mean - m->mean) / m->mean < 0.05);

  // spacing scales thickness exactly
  const auto big = mwt_slice(s, 3.0, 3.0);
  CHECK(big->mean == doctest::Approx(2.0 * m->mean).epsilon(1e-12));
}

TEST_CASE("thin walls and excluded slices") {
  const auto thin = mwt_slice(annulus(40, 20, 20, 9, 10), 1.0, 1.0);
  REQUIRE(thin);
  for (double t : thin->thickness) {
    CHECK(t >= 1.0);
    CHECK(t <= std::sqrt(2.0) + 1e-12);
  }

  MwtExclusion why{};
  CHECK(!mwt_slice(Image<std::uint8_t>(20, 20, 0), 1, 1, 1.0, &why));
  CHECK(why == MwtExclusion::kNoMyocardium);
  Image<std::uint8_t> solid(30, 30, 0);
  const Mask2 d = oracle::disk(30, 30, 15, 15, 8);
  for (std::size_t i = 0; i < d.size(); ++i) solid.values()[i] = d.values()[i] ? LabelSchema::kMYO : 0;
  CHECK(!mwt_slice(solid, 1, 1, 1.0, &why));
  CHECK(why == MwtExclusion::kNoCavity);

  LabelVolume v({30, 30, 2, 1}, {1, 1, 5, 1}, 3);
  v.set_slice(0, 0, annulus(30, 15, 15, 6, 9));
  const auto res = mwt_phase(v);
  CHECK(res.slices.size() == 1);
  REQUIRE(res.excluded.size() == 1);
  CHECK(res.excluded[0].z == 1);
}

TEST_CASE("profile statistics") {
  MwtResult r;
  r.slices = {{0, {}, 4.0, 1.0}, {1, {}, 6.0, 3.0}};
  const auto f = mwt_profile_features(r);
  CHECK(*f[0] == 6.0);
  CHECK(*f[1] == 1.0);
  CHECK(*f[2] == 2.0);
  CHECK(*f[3] == 1.0);

  MwtResult c;
  c.slices = {{0, {}, 5, 0}, {1, {}, 5, 0}, {2, {}, 5, 0}};
  const auto g = mwt_profile_features(c);
  CHECK((*g[0] == 5.0 && *g[1] == 0.0 && *g[2] == 0.0 && *g[3] == 0.0));

  MwtResult one;
  one.slices = {{0, {}, 3, 0.5}};
  const auto h = mwt_profile_features(one);
  CHECK(*h[1] == 0.0);
  CHECK(*h[3] == 0.0);
  for (const auto& x : mwt_profile_features(MwtResult{})) CHECK(!x);
}

TEST_CASE("phantom record against analytic geometry") {
  const HeartPhantomSpec s = default_heart();
  const auto ph = heart_phases(s);
  const auto r = extract_features(ph);
  REQUIRE(r.complete());
  // uniform walls, so the wall profile reduces to its mean
  const auto ed = lattice_volumes(s, s.ed);
  const auto es = lattice_volumes(s, s.es);
  const auto near = [](double got, double want) { return std::abs(got - want) <= 0.02 * std::abs(want); };
  const auto& v = r.values;
  CHECK(near(*v[0], ed.lv));
  CHECK(near(*v[1], ed.rv));
  CHECK(near(*v[2], es.lv));
  CHECK(near(*v[3], es.rv));
  CHECK(near(*v[4], es.myo));
  CHECK(near(*v[5], ed.myo * 1.05));
  CHECK(near(*v[6], (ed.lv - es.lv) / ed.lv));
  CHECK(near(*v[7], (ed.rv - es.rv) / ed.rv));
  CHECK(near(*v[8], ed.lv / ed.rv));
  CHECK(near(*v[9], es.lv / es.rv));
  CHECK(near(*v[10], es.myo / es.lv));
  CHECK(near(*v[11], ed.myo * 1.05 / ed.lv));
  // wall thickness is measured between pixel contours: one pixel of slack
  CHECK(std::abs(*v[12] - s.ed.wall.mean() * 1.5) <= 1.5);
  CHECK(std::abs(*v[16] - s.es.wall.mean() * 1.5) <= 1.5);
  CHECK(*v[13] < 0.5);
  CHECK(*v[17] < 0.5);

  CHECK(extract_features(ph) == r);

  // continuous areas agree up to pixelisation
  const auto ced = analytic_volumes(s, s.ed);
  const auto ces = analytic_volumes(s, s.es);
  for (const auto& [got, want] : {std::pair{*v[0], ced.lv}, {*v[1], ced.rv}, {*v[2], ces.lv},
                                  {*v[3], ces.rv}, {*v[4], ces.myo}}) {
    CHECK(std::abs(got - want) <= 0.03 * want);
  }
}

TEST_CASE("partial records") {
  auto ph = heart_phases(default_heart());
  ph.es = ph.ed;
  const auto same = extract_features(ph);
  CHECK(*same.values[6] == 0.0);
  CHECK(*same.values[7] == 0.0);
  for (auto& x : ph.es.values()) {
    if (x == LabelSchema::kRV) x = 0;
  }
  const auto r = extract_features(ph);
  CHECK(!r.values[9]);
  CHECK(*r.values[7] == 1.0);
  CHECK(!r.complete());

  auto bad = heart_phases(default_heart());
  bad.es = LabelVolume({10, 10, 1, 1}, {1, 1, 1, 1}, 3);
  CHECK_THROWS_AS(extract_features(bad), Error);
}

TEST_CASE("feature CSV round trip") {
  const auto r = extract_features(heart_phases(default_heart()));
  FeatureRecord partial = r;
  partial.values[3].reset();
  const std::string text = features_csv_header() + features_csv_row("a", r) + features_csv_row("b", partial);
  const auto t = parse_features_csv(text);
  REQUIRE(t.records.size() == 2);
  CHECK(t.case_ids == std::vector<std::string>{"a", "b"});
  CHECK(t.records[0] == r);
  CHECK(t.records[1] == partial);
  CHECK(feature_names().size() == 20);
  CHECK(feature_names()[kExpertFeatureBegin] == "es_mwt_max_mean");
  CHECK_THROWS_AS(parse_features_csv("case_id,x\n"), Error);
  CHECK_THROWS_AS(features_csv_row("a,b", r), Error);
}
