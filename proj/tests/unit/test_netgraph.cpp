#include <doctest.h>

#include <set>

#include "cmr/error.hpp"
#include "cmr/netgraph.hpp"

using namespace cmr;

namespace {

const NetNode& node(const NetGraph& g, const std::string& name) {
  for (const auto& n : g.nodes) {
    if (n.name == name) return n;
  }
  FAIL("missing node " << name);
  return g.nodes.front();
}

NetConfig small(NetVariant v) {
  NetConfig c;
  c.variant = v;
  c.f = 48;
  c.down_layers = {4, 4, 4};
  return c;
}

}  // namespace

TEST_CASE("dense block channel growth") {
  const auto g = build_graph(small(NetVariant::kA));
  CHECK(node(g, "stem.conv3x3").out.c == 48);
  CHECK(node(g, "db1.l4.cat").out.c == 48 + 4 * 12);
  CHECK(node(g, "td1.conv").out_channels == 96);
}

TEST_CASE("projection skip joins") {
  const auto g = build_graph(small(NetVariant::kB));
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::kAdd) {
      for (int in : n.inputs) CHECK(g.nodes[in].out == n.out);
    }
    if (n.kind == NodeKind::kConcat) {
      for (int in : n.inputs) {
        CHECK(g.nodes[in].out.h == n.out.h);
        CHECK(g.nodes[in].out.w == n.out.w);
      }
    }
  }
  const auto& proj = node(g, "skip3.proj.conv");
  CHECK(proj.params == proj.out_channels * g.nodes[proj.inputs[0]].out.c + proj.out_channels);
}

TEST_CASE("inception stem") {
  NetConfig c;
  c.f = 36;
  const auto g = build_graph(c);
  CHECK(node(g, "stem.conv3x3").out.c == 18);
  CHECK(node(g, "stem.conv5x5").out.c == 9);
  CHECK(node(g, "stem.conv7x7").out.c == 9);
  CHECK(node(g, "stem.cat").out.c == 36);
  CHECK(node(g, "stem.conv3x3").params == 9 * 18 + 18);
}

TEST_CASE("parameter arithmetic") {
  NetConfig c;
  c.variant = NetVariant::kA;
  c.f = 8;
  const auto g = build_graph(c);
  CHECK(node(g, "stem.conv3x3").params == 80);
  long sum = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::kBatchNorm) CHECK(n.params == 2 * g.nodes[n.inputs[0]].out.c);
    if (n.kind == NodeKind::kMaxPool || n.kind == NodeKind::kDropout || n.kind == NodeKind::kElu ||
        n.kind == NodeKind::kAdd || n.kind == NodeKind::kConcat) {
      CHECK(n.params == 0);
    }
    if (n.kind == NodeKind::kDropout) CHECK(n.rate == 0.2);
    sum += n.params;
  }
  CHECK(param_count(g) == sum);
  long by_block = 0;
  for (const auto& b : param_breakdown(g)) by_block += b.params;
  CHECK(by_block == sum);
}

TEST_CASE("graph is topological and connected") {
  for (auto v : {NetVariant::kA, NetVariant::kB, NetVariant::kC}) {
    NetConfig cfg;
    cfg.variant = v;
    const auto g = build_graph(cfg);
    std::set<int> used;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      CHECK(g.nodes[i].id == static_cast<int>(i));
      for (int in : g.nodes[i].inputs) {
        CHECK(in < static_cast<int>(i));
        used.insert(in);
      }
    }
    // every node except the output feeds another one
    for (std::size_t i = 0; i + 1 < g.nodes.size(); ++i) CHECK(used.count(static_cast<int>(i)) == 1);
  }
}

TEST_CASE("shapes") {
  const auto g = build_graph(NetConfig{});
  CHECK(node(g, "td3.pool").out.h == 16);
  CHECK(node(g, "td3.pool").out.w == 16);
  CHECK(g.output().out == Shape3{4, 128, 128});
  const auto& t = node(g, "tu1.tconv");
  CHECK(t.out.h == 2 * g.nodes[t.inputs[0]].out.h);

  const auto tr = shape_trace(g, {1, 64, 96});
  CHECK(tr.back() == Shape3{4, 64, 96});
  try {
    shape_trace(g, {1, 100, 100});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTrace);
  }
  NetConfig bad;
  bad.input = {1, 100, 100};
  try {
    build_graph(bad);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBuild);
  }
  CHECK(parse_shape("3x64x32") == Shape3{3, 64, 32});
  CHECK_THROWS_AS(parse_shape("3x64"), Error);
}

TEST_CASE("projection variants are lighter") {
  for (int k : {4, 12, 16}) {
    NetConfig a;
    a.k = k;
    a.variant = NetVariant::kA;
    NetConfig b = a;
    b.variant = NetVariant::kB;
    NetConfig c = a;
    c.variant = NetVariant::kC;
    const long pa = param_count(build_graph(a));
    CHECK(param_count(build_graph(b)) < pa);
    CHECK(param_count(build_graph(c)) < pa);
  }
}

TEST_CASE("growth sweep") {
  const std::vector<int> ks{2, 4, 6, 8, 10, 12, 14, 16};
  const auto pts = growth_sweep(NetConfig{}, ks);
  REQUIRE(pts.size() == ks.size());
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].params > pts[i - 1].params);
  CHECK(fit_quadratic(pts).r2 >= 0.999);

  // exact quadratic data is fitted exactly
  std::vector<SweepPoint> q;
  for (int k : ks) q.push_back({k, 0, 3L * k * k + 5L * k + 7});
  const auto f = fit_quadratic(q);
  CHECK(f.a == doctest::Approx(3.0));
  CHECK(f.b == doctest::Approx(5.0));
  CHECK(f.c == doctest::Approx(7.0));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("published growth-rate table") {
  const auto& ref = growth_table_reference();
  REQUIRE(ref.size() == 8);
  CHECK(ref.front() == std::pair<int, long>{2, 11452});
  CHECK(ref[5] == std::pair<int, long>{12, 370732});
  for (const auto& [k, params] : ref) CHECK(param_count(build_graph(NetConfig::growth_table_preset(k))) == params);
  const auto rows = calibration_report(NetConfig{});
  CHECK(rows.size() == 8);
  for (const auto& r : rows) CHECK(r.preset == r.reference);
}

TEST_CASE("exports") {
  const auto g = build_graph(NetConfig{});
  CHECK(to_dot(g).rfind("digraph", 0) == 0);
  CHECK(to_json(g).find("\"params\"") != std::string::npos);
  NetConfig bad;
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
