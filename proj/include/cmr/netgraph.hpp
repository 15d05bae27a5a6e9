#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cmr {

enum class NetVariant : std::uint8_t { kA, kB, kC };

std::string_view variant_name(NetVariant v) noexcept;
NetVariant parse_variant(std::string_view s);

struct Shape3 {
  long c = 0;
  long h = 0;
  long w = 0;
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);
/// "CxHxW", e.g. "1x128x128".
Shape3 parse_shape(std::string_view s);

struct NetConfig {
  NetVariant variant = NetVariant::kC;
  int k = 12;   // growth rate
  int f = 36;   // maps of the first layer
  int pools = 3;
  std::vector<int> down_layers{4, 4, 4};  // one entry per pooling
  int bottleneck_layers = 4;
  std::vector<int> up_layers{4, 4, 4};
  Shape3 input{1, 128, 128};
  int classes = 4;
  std::array<int, 3> inception_ratio{2, 1, 1};  // 3x3 : 5x5 : 7x7
  double dropout = 0.2;

  void validate() const;

  /// Layer configuration that reproduces the published growth-rate table:
  /// dense blocks of 2, 3, 4 layers down, 5 at the bottleneck, 4, 3, 2 up,
  /// F = 3k split evenly over the three first-layer branches.
  static NetConfig growth_table_preset(int k);
};

enum class NodeKind : std::uint8_t {
  kInput,
  kConv,
  kBatchNorm,
  kElu,
  kDropout,
  kMaxPool,
  kTransposedConv,
  kConcat,
  kAdd,
  kSoftmax,
};

std::string_view node_kind_name(NodeKind k) noexcept;

struct NetNode {
  int id = 0;
  NodeKind kind = NodeKind::kInput;
  std::string name;
  std::string block;
  std::vector<int> inputs;
  int kernel = 0;        // conv / transposed conv
  int stride = 1;
  long out_channels = 0;  // conv / transposed conv
  double rate = 0.0;      // dropout
  Shape3 out;
  long params = 0;
};

/// Nodes are stored in topological order.
struct NetGraph {
  NetConfig cfg;
  std::vector<NetNode> nodes;

  const NetNode& output() const { return nodes.back(); }
};

/// Errors: invalid config -> kArgument; shape conflicts such as an odd
/// extent at a pooling -> kBuild naming the node.
NetGraph build_graph(const NetConfig& cfg);

struct BlockParams {
  std::string block;
  long params = 0;
};

long param_count(const NetGraph& g);
std::vector<BlockParams> param_breakdown(const NetGraph& g);

/// Re-propagates shapes for a different input. Divisibility problems raise
/// kTrace naming the node.
std::vector<Shape3> shape_trace(const NetGraph& g, Shape3 input);

struct SweepPoint {
  int k = 0;
  int f = 0;
  long params = 0;
};

struct QuadraticFit {
  double a = 0.0;  // params ~ a k^2 + b k + c
  double b = 0.0;
  double c = 0.0;
  double r2 = 0.0;
};

/// Params for each k with F scaled proportionally (F = round(f * k / base.k)).
std::vector<SweepPoint> growth_sweep(const NetConfig& base, const std::vector<int>& ks);
QuadraticFit fit_quadratic(const std::vector<SweepPoint>& pts);

struct CalibrationRow {
  int k = 0;
  long reference = 0;     // published count
  long configured = 0;    // given config (F scaled with k)
  long preset = 0;        // growth_table_preset(k)
};

/// Published parameter counts for k = 2, 4, ..., 16.
const std::vector<std::pair<int, long>>& growth_table_reference();
std::vector<CalibrationRow> calibration_report(const NetConfig& base);

std::string to_dot(const NetGraph& g);
std::string to_json(const NetGraph& g);

}  // namespace cmr
