#include "cmr/netgraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "cmr/error.hpp"

namespace cmr {

std::string_view variant_name(NetVariant v) noexcept {
  switch (v) {
    case NetVariant::kA: return "A";
    case NetVariant::kB: return "B";
    case NetVariant::kC: return "C";
  }
  return "?";
}

NetVariant parse_variant(std::string_view s) {
  if (s == "A" || s == "a") return NetVariant::kA;
  if (s == "B" || s == "b") return NetVariant::kB;
  if (s == "C" || s == "c") return NetVariant::kC;
  fail(ErrorCode::kArgument, "unknown network variant '" + std::string(s) + "' (expected A, B or C)");
}

std::string to_string(const Shape3& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

Shape3 parse_shape(std::string_view s) {
  long v[3] = {0, 0, 0};
  const char* p = s.data();
  const char* end = s.data() + s.size();
  for (int i = 0; i < 3; ++i) {
    const auto r = std::from_chars(p, end, v[i]);
    if (r.ec != std::errc{} || v[i] <= 0) {
      fail(ErrorCode::kArgument, "bad shape '" + std::string(s) + "' (expected CxHxW)");
    }
    p = r.ptr;
    if (i < 2) {
      if (p == end || *p != 'x') fail(ErrorCode::kArgument, "bad shape '" + std::string(s) + "' (expected CxHxW)");
      ++p;
    }
  }
  if (p != end) fail(ErrorCode::kArgument, "bad shape '" + std::string(s) + "' (expected CxHxW)");
  return {v[0], v[1], v[2]};
}

void NetConfig::validate() const {
  if (k < 1) fail(ErrorCode::kArgument, "growth rate k must be >= 1");
  if (f < 1) fail(ErrorCode::kArgument, "initial feature maps F must be >= 1");
  if (pools < 1) fail(ErrorCode::kArgument, "number of poolings P must be >= 1");
  if (static_cast<int>(down_layers.size()) != pools || static_cast<int>(up_layers.size()) != pools) {
    fail(ErrorCode::kArgument, "down and up layer lists need one entry per pooling (P = " +
                                   std::to_string(pools) + ")");
  }
  const auto positive = [](int x) { return x >= 1; };
  if (!std::all_of(down_layers.begin(), down_layers.end(), positive) ||
      !std::all_of(up_layers.begin(), up_layers.end(), positive) || bottleneck_layers < 1) {
    fail(ErrorCode::kArgument, "every dense block needs at least one layer");
  }
  if (input.c < 1 || input.h < 1 || input.w < 1) fail(ErrorCode::kArgument, "input shape must be positive");
  if (classes < 1) fail(ErrorCode::kArgument, "class count must be >= 1");
  if (variant == NetVariant::kC) {
    if (std::any_of(inception_ratio.begin(), inception_ratio.end(), [](int r) { return r < 0; }) ||
        std::accumulate(inception_ratio.begin(), inception_ratio.end(), 0) == 0) {
      fail(ErrorCode::kArgument, "inception ratio must be non-negative and not all zero");
    }
    if (f < 3) fail(ErrorCode::kArgument, "variant C needs F >= 3 for its three branches");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::kArgument, "dropout rate must be in [0, 1)");
}

NetConfig NetConfig::growth_table_preset(int k) {
  NetConfig c;
  c.variant = NetVariant::kC;
  c.k = k;
  c.f = 3 * k;
  c.pools = 3;
  c.down_layers = {2, 3, 4};
  c.bottleneck_layers = 5;
  c.up_layers = {4, 3, 2};
  c.inception_ratio = {1, 1, 1};
  return c;
}

std::string_view node_kind_name(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::kInput: return "input";
    case NodeKind::kConv: return "conv";
    case NodeKind::kBatchNorm: return "batchnorm";
    case NodeKind::kElu: return "elu";
    case NodeKind::kDropout: return "dropout";
    case NodeKind::kMaxPool: return "maxpool";
    case NodeKind::kTransposedConv: return "transposed_conv";
    case NodeKind::kConcat: return "concat";
    case NodeKind::kAdd: return "add";
    case NodeKind::kSoftmax: return "softmax";
  }
  return "?";
}

namespace {

// Computes n.out and n.params from the already-shaped inputs.
void shape_node(NetNode& n, const std::vector<NetNode>& nodes, ErrorCode code) {
  const auto in = [&](std::size_t i) -> const Shape3& { return nodes[n.inputs.at(i)].out; };
  const auto bad = [&](const std::string& why) { fail(code, "node '" + n.name + "': " + why); };
  switch (n.kind) {
    case NodeKind::kInput:
      break;
    case NodeKind::kConv: {
      const Shape3 s = in(0);
      n.out = {n.out_channels, s.h, s.w};
      n.params = static_cast<long>(n.kernel) * n.kernel * s.c * n.out_channels + n.out_channels;
      break;
    }
    case NodeKind::kBatchNorm:
      n.out = in(0);
      n.params = 2 * n.out.c;
      break;
    case NodeKind::kElu:
    case NodeKind::kDropout:
    case NodeKind::kSoftmax:
      n.out = in(0);
      n.params = 0;
      break;
    case NodeKind::kMaxPool: {
      const Shape3 s = in(0);
      if (s.h % 2 != 0 || s.w % 2 != 0) {
        bad("2x2 pooling needs even spatial extent, got " + std::to_string(s.h) + "x" + std::to_string(s.w));
      }
      n.out = {s.c, s.h / 2, s.w / 2};
      n.params = 0;
      break;
    }
    case NodeKind::kTransposedConv: {
      const Shape3 s = in(0);
      n.out = {n.out_channels, s.h * n.stride, s.w * n.stride};
      n.params = static_cast<long>(n.kernel) * n.kernel * s.c * n.out_channels + n.out_channels;
      break;
    }
    case NodeKind::kConcat: {
      Shape3 o = in(0);
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        const Shape3& s = in(i);
        if (s.h != o.h || s.w != o.w) bad("concat inputs differ in spatial size");
        o.c += s.c;
      }
      n.out = o;
      n.params = 0;
      break;
    }
    case NodeKind::kAdd: {
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        if (!(in(i) == in(0))) bad("add inputs " + to_string(in(0)) + " and " + to_string(in(i)) + " differ");
      }
      n.out = in(0);
      n.params = 0;
      break;
    }
  }
}

class Builder {
 public:
  explicit Builder(const NetConfig& cfg) : cfg_(cfg) {}

  int add(NodeKind kind, std::string name, std::vector<int> inputs, long out_c = 0, int kernel = 0,
          int stride = 1) {
    NetNode n;
    n.id = static_cast<int>(nodes_.size());
    n.kind = kind;
    n.name = std::move(name);
    n.block = block_;
    n.inputs = std::move(inputs);
    n.out_channels = out_c;
    n.kernel = kernel;
    n.stride = stride;
    if (kind == NodeKind::kDropout) n.rate = cfg_.dropout;
    if (kind == NodeKind::kInput) n.out = cfg_.input;
    shape_node(n, nodes_, ErrorCode::kBuild);
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  long channels(int id) const { return nodes_[id].out.c; }

  // BN -> ELU -> conv -> dropout
  int bn_elu_conv(const std::string& p, int x, long out_c, int kernel) {
    x = add(NodeKind::kBatchNorm, p + ".bn", {x});
    x = add(NodeKind::kElu, p + ".elu", {x});
    x = add(NodeKind::kConv, p + ".conv", {x}, out_c, kernel);
    return add(NodeKind::kDropout, p + ".drop", {x});
  }

  // Dense block. Returns either the concatenation of the new layer outputs
  // or, with `with_input`, the input concatenated with them.
  int dense_block(const std::string& p, int x, int layers, bool with_input) {
    int stack = x;
    std::vector<int> fresh;
    for (int l = 0; l < layers; ++l) {
      const std::string lp = p + ".l" + std::to_string(l + 1);
      const int y = bn_elu_conv(lp, stack, cfg_.k, 3);
      fresh.push_back(y);
      if (l + 1 < layers || with_input) stack = add(NodeKind::kConcat, lp + ".cat", {stack, y});
    }
    if (with_input) return stack;
    if (fresh.size() == 1) return fresh.front();
    return add(NodeKind::kConcat, p + ".out", fresh);
  }

  // Dense block whose new features are added to a projection of its input.
  int residual_dense_block(const std::string& p, int x, int layers) {
    const int y = dense_block(p, x, layers, false);
    const int proj = bn_elu_conv(p + ".proj", x, channels(y), 1);
    return add(NodeKind::kAdd, p + ".add", {y, proj});
  }

  std::vector<long> branch_sizes() const {
    const auto& r = cfg_.inception_ratio;
    const long total = r[0] + r[1] + r[2];
    std::array<long, 3> b{};
    std::array<long, 3> rem{};
    long used = 0;
    for (int i = 0; i < 3; ++i) {
      b[i] = static_cast<long>(cfg_.f) * r[i] / total;
      rem[i] = static_cast<long>(cfg_.f) * r[i] % total;
      used += b[i];
    }
    // Largest remainder first, earlier branch on ties.
    while (used < cfg_.f) {
      int best = 0;
      for (int i = 1; i < 3; ++i) {
        if (rem[i] > rem[best]) best = i;
      }
      ++b[best];
      rem[best] = -1;
      ++used;
    }
    return {b[0], b[1], b[2]};
  }

  NetGraph build() {
    cfg_.validate();
    block_ = "input";
    int x = add(NodeKind::kInput, "input", {});

    block_ = "stem";
    if (cfg_.variant == NetVariant::kC) {
      const auto sizes = branch_sizes();
      const int kernels[3] = {3, 5, 7};
      std::vector<int> outs;
      for (int i = 0; i < 3; ++i) {
        if (sizes[i] == 0) continue;
        const std::string name = "stem.conv" + std::to_string(kernels[i]) + "x" + std::to_string(kernels[i]);
        outs.push_back(add(NodeKind::kConv, name, {x}, sizes[i], kernels[i]));
      }
      x = outs.size() == 1 ? outs.front() : add(NodeKind::kConcat, "stem.cat", outs);
    } else {
      x = add(NodeKind::kConv, "stem.conv3x3", {x}, cfg_.f, 3);
    }

    std::vector<int> skips;
    for (int i = 0; i < cfg_.pools; ++i) {
      const std::string id = std::to_string(i + 1);
      block_ = "db" + id;
      const int full = dense_block("db" + id, x, cfg_.down_layers[i], true);
      skips.push_back(full);
      block_ = "td" + id;
      x = bn_elu_conv("td" + id, full, channels(full), 1);
      x = add(NodeKind::kMaxPool, "td" + id + ".pool", {x});
    }

    block_ = "bottleneck";
    if (cfg_.variant == NetVariant::kA) {
      x = dense_block("bottleneck", x, cfg_.bottleneck_layers, false);
    } else {
      x = residual_dense_block("bottleneck", x, cfg_.bottleneck_layers);
    }

    for (int i = 0; i < cfg_.pools; ++i) {
      const std::string id = std::to_string(i + 1);
      const int skip = skips[cfg_.pools - 1 - i];
      block_ = "tu" + id;
      x = add(NodeKind::kTransposedConv, "tu" + id + ".tconv", {x}, channels(x), 3, 2);
      block_ = "skip" + id;
      if (cfg_.variant == NetVariant::kA) {
        x = add(NodeKind::kConcat, "skip" + id + ".cat", {x, skip});
      } else {
        const int proj = bn_elu_conv("skip" + id + ".proj", skip, channels(x), 1);
        x = add(NodeKind::kAdd, "skip" + id + ".add", {x, proj});
      }
      block_ = "up" + id;
      const bool last = i + 1 == cfg_.pools;
      if (cfg_.variant == NetVariant::kA) {
        x = dense_block("up" + id, x, cfg_.up_layers[i], last);
      } else {
        x = residual_dense_block("up" + id, x, cfg_.up_layers[i]);
      }
    }

    block_ = "head";
    x = add(NodeKind::kConv, "head.conv1x1", {x}, cfg_.classes, 1);
    add(NodeKind::kSoftmax, "head.softmax", {x});

    NetGraph g;
    g.cfg = cfg_;
    g.nodes = std::move(nodes_);
    return g;
  }

 private:
  NetConfig cfg_;
  std::string block_;
  std::vector<NetNode> nodes_;
};

}  // namespace

NetGraph build_graph(const NetConfig& cfg) { return Builder(cfg).build(); }

long param_count(const NetGraph& g) {
  long total = 0;
  for (const auto& n : g.nodes) total += n.params;
  return total;
}

std::vector<BlockParams> param_breakdown(const NetGraph& g) {
  std::vector<BlockParams> out;
  for (const auto& n : g.nodes) {
    if (out.empty() || out.back().block != n.block) out.push_back({n.block, 0});
    out.back().params += n.params;
  }
  return out;
}

std::vector<Shape3> shape_trace(const NetGraph& g, Shape3 input) {
  if (input.c != g.cfg.input.c) {
    fail(ErrorCode::kTrace, "input has " + std::to_string(input.c) + " channels, graph was built for " +
                                std::to_string(g.cfg.input.c));
  }
  if (input.h < 1 || input.w < 1) fail(ErrorCode::kTrace, "input extent must be positive");
  const long div = 1L << g.cfg.pools;
  if (input.h % div != 0 || input.w % div != 0) {
    fail(ErrorCode::kTrace, "input " + std::to_string(input.h) + "x" + std::to_string(input.w) +
                                " is not divisible by 2^P = " + std::to_string(div));
  }
  std::vector<NetNode> nodes = g.nodes;
  std::vector<Shape3> shapes;
  for (auto& n : nodes) {
    if (n.kind == NodeKind::kInput) {
      n.out = input;
    } else {
      shape_node(n, nodes, ErrorCode::kTrace);
    }
    shapes.push_back(n.out);
  }
  return shapes;
}

std::vector<SweepPoint> growth_sweep(const NetConfig& base, const std::vector<int>& ks) {
  std::vector<SweepPoint> out;
  for (int k : ks) {
    NetConfig c = base;
    c.k = k;
    c.f = static_cast<int>(std::lround(static_cast<double>(base.f) * k / base.k));
    out.push_back({k, c.f, param_count(build_graph(c))});
  }
  return out;
}

QuadraticFit fit_quadratic(const std::vector<SweepPoint>& pts) {
  if (pts.size() < 3) fail(ErrorCode::kArgument, "quadratic fit needs at least three points");
  // Normal equations for [k^2, k, 1].
  double m[3][4] = {};
  for (const auto& p : pts) {
    const double k = p.k;
    const double row[3] = {k * k, k, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
      m[i][3] += row[i] * static_cast<double>(p.params);
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    if (m[col][col] == 0.0) fail(ErrorCode::kArgument, "quadratic fit is singular (repeated k values)");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[r][j] -= f * m[col][j];
    }
  }
  QuadraticFit fit{m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2], 0.0};
  double mean = 0.0;
  for (const auto& p : pts) mean += static_cast<double>(p.params);
  mean /= static_cast<double>(pts.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& p : pts) {
    const double k = p.k;
    const double pred = fit.a * k * k + fit.b * k + fit.c;
    const double y = static_cast<double>(p.params);
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - mean) * (y - mean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

const std::vector<std::pair<int, long>>& growth_table_reference() {
  static const std::vector<std::pair<int, long>> ref = {
      {2, 11452},   {4, 43036},   {6, 94756},   {8, 166612},
      {10, 258604}, {12, 370732}, {14, 502996}, {16, 655396},
  };
  return ref;
}

std::vector<CalibrationRow> calibration_report(const NetConfig& base) {
  std::vector<CalibrationRow> rows;
  for (const auto& [k, ref] : growth_table_reference()) {
    NetConfig c = base;
    c.k = k;
    c.f = static_cast<int>(std::lround(static_cast<double>(base.f) * k / base.k));
    rows.push_back({k, ref, param_count(build_graph(c)), param_count(build_graph(NetConfig::growth_table_preset(k)))});
  }
  return rows;
}

std::string to_dot(const NetGraph& g) {
  std::string out = "digraph dfcn {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n";
  for (const auto& n : g.nodes) {
    out += "  n" + std::to_string(n.id) + " [label=\"" + n.name + "\\n" + std::string(node_kind_name(n.kind)) +
           " " + to_string(n.out);
    if (n.params) out += "\\n" + std::to_string(n.params) + " params";
    out += "\"];\n";
  }
  for (const auto& n : g.nodes) {
    for (int i : n.inputs) out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.id) + ";\n";
  }
  out += "}\n";
  return out;
}

std::string to_json(const NetGraph& g) {
  nlohmann::ordered_json j;
  const auto& c = g.cfg;
  j["variant"] = std::string(variant_name(c.variant));
  j["k"] = c.k;
  j["f"] = c.f;
  j["pools"] = c.pools;
  j["down_layers"] = c.down_layers;
  j["bottleneck_layers"] = c.bottleneck_layers;
  j["up_layers"] = c.up_layers;
  j["input"] = to_string(c.input);
  j["classes"] = c.classes;
  if (c.variant == NetVariant::kC) j["inception_ratio"] = c.inception_ratio;
  j["total_params"] = param_count(g);
  auto& blocks = j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : param_breakdown(g)) blocks.push_back({{"block", b.block}, {"params", b.params}});
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nlohmann::ordered_json e;
    e["id"] = n.id;
    e["name"] = n.name;
    e["kind"] = std::string(node_kind_name(n.kind));
    e["inputs"] = n.inputs;
    e["shape"] = {n.out.c, n.out.h, n.out.w};
    e["params"] = n.params;
    if (n.kind == NodeKind::kDropout) e["rate"] = n.rate;
    nodes.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace cmr
