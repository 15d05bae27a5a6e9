#include "cmr/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

extern char** environ;

namespace cmr {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  fail(ErrorCode::kConfig, "config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                               "' as " + expected);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v, const char* expected) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) bad_value(key, v, expected);
  return out;
}

int to_int(std::string_view key, std::string_view v) { return parse_number<int>(key, v, "an integer"); }
double to_real(std::string_view key, std::string_view v) { return parse_number<double>(key, v, "a real"); }
std::uint64_t to_u64(std::string_view key, std::string_view v) {
  return parse_number<std::uint64_t>(key, v, "an unsigned integer");
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean (true/false)");
}

PatchSize to_patch(std::string_view key, std::string_view v) {
  const auto x = v.find('x');
  if (x == std::string_view::npos) bad_value(key, v, "WxH");
  const int w = parse_number<int>(key, v.substr(0, x), "WxH");
  const int h = parse_number<int>(key, v.substr(x + 1), "WxH");
  if (w <= 0 || h <= 0) bad_value(key, v, "positive WxH");
  return {static_cast<std::size_t>(w), static_cast<std::size_t>(h)};
}

std::vector<int> to_int_list(std::string_view key, std::string_view v, char sep) {
  std::vector<int> out;
  while (true) {
    const auto c = v.find(sep);
    out.push_back(to_int(key, v.substr(0, c)));
    if (c == std::string_view::npos) break;
    v.remove_prefix(c + 1);
  }
  return out;
}

std::string join_ints(const auto& xs, char sep) {
  std::string out;
  for (const int x : xs) {
    if (!out.empty()) out += sep;
    out += std::to_string(x);
  }
  return out;
}

std::string real_str(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct Entry {
  ConfigKey key;
  std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define CMR_INT(NAME, FIELD, HELP)                                                                  \
  Entry {                                                                                           \
    {NAME, HELP}, [](PipelineConfig& c, std::string_view k, std::string_view v) { c.FIELD = to_int(k, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.FIELD); }                             \
  }
#define CMR_REAL(NAME, FIELD, HELP)                                                                  \
  Entry {                                                                                            \
    {NAME, HELP}, [](PipelineConfig& c, std::string_view k, std::string_view v) { c.FIELD = to_real(k, v); }, \
        [](const PipelineConfig& c) { return real_str(c.FIELD); }                                    \
  }
#define CMR_BOOL(NAME, FIELD, HELP)                                                                  \
  Entry {                                                                                            \
    {NAME, HELP}, [](PipelineConfig& c, std::string_view k, std::string_view v) { c.FIELD = to_bool(k, v); }, \
        [](const PipelineConfig& c) { return bool_str(c.FIELD); }                                    \
  }

const std::vector<Entry>& entries_table() {
  static const std::vector<Entry> table = {
      CMR_INT("roi.radius_min", roi.radius_min, "smallest Hough radius, px"),
      CMR_INT("roi.radius_max", roi.radius_max, "largest Hough radius, px"),
      CMR_INT("roi.top_p", roi.top_p, "circles kept per slice"),
      CMR_REAL("roi.vote_sigma", roi.vote_sigma, "Gaussian sigma of the centre votes, px"),
      CMR_REAL("roi.h1_noise_frac", roi.h1_noise_frac, "H1 values below this fraction of the maximum are zeroed"),
      CMR_REAL("roi.canny_sigma", roi.canny_sigma, "Canny smoothing sigma, px"),
      CMR_REAL("roi.canny_low", roi.canny_low, "Canny low threshold, fraction of the gradient maximum"),
      CMR_REAL("roi.canny_high", roi.canny_high, "Canny high threshold, fraction of the gradient maximum"),
      Entry{{"roi.patch_size", "ROI patch WxH"},
            [](PipelineConfig& c, std::string_view k, std::string_view v) { c.roi.patch_size = to_patch(k, v); },
            [](const PipelineConfig& c) {
              return std::to_string(c.roi.patch_size.w) + "x" + std::to_string(c.roi.patch_size.h);
            }},
      CMR_REAL("loss.lambda", loss.lambda, "weight of the Dice term"),
      CMR_REAL("loss.gamma", loss.gamma, "weight of the cross-entropy term"),
      CMR_REAL("loss.eta", loss.eta, "weight decay factor"),
      CMR_REAL("loss.epsilon", loss.epsilon, "Dice smoothing constant"),
      CMR_BOOL("loss.dice_two_factor", loss.dice_two_factor, "use 2|P.G| / (|P| + |G|) instead of |P.G| / (|P| + |G|)"),
      CMR_INT("weights.dilate", weight_dilate, "contour dilation iterations of the weight map"),
      CMR_BOOL("postproc.enabled", postproc, "run label post-processing in the pipeline"),
      CMR_BOOL("postproc.largest_3d", post.largest_3d, "keep the largest 3D component per class"),
      CMR_BOOL("postproc.largest_2d", post.largest_2d, "keep the largest 2D component per slice"),
      CMR_BOOL("postproc.fill", post.fill, "fill holes per slice"),
      CMR_INT("postproc.max_rounds", post.max_rounds, "repetitions until a fixed point"),
      CMR_REAL("features.myo_density", features.myo_density, "myocardial density, g/mL"),
      CMR_REAL("features.canny_sigma", features.canny_sigma, "contour smoothing for wall thickness"),
      CMR_REAL("augment.max_angle_deg", augment.max_angle_deg, "rotation bound, degrees"),
      CMR_REAL("augment.max_shift_mm", augment.max_shift_mm, "translation bound, mm"),
      CMR_REAL("augment.zoom_min", augment.zoom_min, "smallest zoom factor"),
      CMR_REAL("augment.zoom_max", augment.zoom_max, "largest zoom factor"),
      CMR_REAL("augment.noise_sigma", augment.noise_sigma, "Gaussian noise sigma"),
      CMR_REAL("augment.max_elastic_mm", augment.max_elastic_mm, "elastic control-point bound, mm"),
      CMR_BOOL("augment.flips", augment_flips, "sample horizontal and vertical flips"),
      Entry{{"classifier.seed", "seed of every classifier and fold split"},
            [](PipelineConfig& c, std::string_view k, std::string_view v) { c.ensemble.seed = to_u64(k, v); },
            [](const PipelineConfig& c) { return std::to_string(c.ensemble.seed); }},
      CMR_INT("classifier.cv_folds", ensemble.cv_folds, "folds of the member cross-validation"),
      CMR_BOOL("classifier.compute_cv", ensemble.compute_cv, "cross-validate members while training"),
      CMR_BOOL("classifier.selection", ensemble.use_selection, "only members above the threshold vote"),
      CMR_REAL("classifier.threshold", ensemble.selection_threshold, "selection threshold on CV accuracy (strict)"),
      CMR_INT("classifier.rf_trees", ensemble.base.rf_trees, "random forest size"),
      CMR_INT("classifier.mlp_max_epochs", ensemble.base.mlp_max_epochs, "MLP epoch limit"),
      CMR_REAL("classifier.svm_c", ensemble.base.svm_c, "SVM box constraint"),
      Entry{{"classifier.model", "trained model used by pipeline and predict"},
            [](PipelineConfig& c, std::string_view, std::string_view v) { c.model_path = std::string(v); },
            [](const PipelineConfig& c) { return c.model_path; }},
      CMR_INT("pipeline.threads", threads, "concurrent cases in batch mode"),
      Entry{{"net.variant", "network variant A, B or C"},
            [](PipelineConfig& c, std::string_view, std::string_view v) { c.net.variant = parse_variant(v); },
            [](const PipelineConfig& c) { return std::string(variant_name(c.net.variant)); }},
      CMR_INT("net.k", net.k, "dense-block growth rate"),
      CMR_INT("net.f", net.f, "feature maps of the first layer"),
      CMR_INT("net.pools", net.pools, "number of poolings"),
      Entry{{"net.down_layers", "layers per down-path dense block, comma separated"},
            [](PipelineConfig& c, std::string_view k, std::string_view v) { c.net.down_layers = to_int_list(k, v, ','); },
            [](const PipelineConfig& c) { return join_ints(c.net.down_layers, ','); }},
      CMR_INT("net.bottleneck_layers", net.bottleneck_layers, "layers of the bottleneck dense block"),
      Entry{{"net.up_layers", "layers per up-path dense block, comma separated"},
            [](PipelineConfig& c, std::string_view k, std::string_view v) { c.net.up_layers = to_int_list(k, v, ','); },
            [](const PipelineConfig& c) { return join_ints(c.net.up_layers, ','); }},
      Entry{{"net.input", "input shape CxHxW"},
            [](PipelineConfig& c, std::string_view, std::string_view v) { c.net.input = parse_shape(v); },
            [](const PipelineConfig& c) { return to_string(c.net.input); }},
      CMR_INT("net.classes", net.classes, "output classes"),
      Entry{{"net.inception_ratio", "first-layer 3x3:5x5:7x7 split (variant C)"},
            [](PipelineConfig& c, std::string_view k, std::string_view v) {
              const auto r = to_int_list(k, v, ':');
              if (r.size() != 3) bad_value(k, v, "three integers a:b:c");
              c.net.inception_ratio = {r[0], r[1], r[2]};
            },
            [](const PipelineConfig& c) { return join_ints(c.net.inception_ratio, ':'); }},
      CMR_REAL("net.dropout", net.dropout, "dropout rate"),
  };
  return table;
}

#undef CMR_INT
#undef CMR_REAL
#undef CMR_BOOL

const Entry& find_entry(std::string_view key) {
  const auto& t = entries_table();
  const auto it = std::find_if(t.begin(), t.end(), [&](const Entry& e) { return e.key.name == key; });
  if (it == t.end()) fail(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
  return *it;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  const Entry& e = find_entry(key);
  try {
    e.set(*this, key, trim(value));
  } catch (const Error& err) {
    if (err.code() == ErrorCode::kConfig) throw;
    fail(ErrorCode::kConfig, "config key '" + std::string(key) + "': " + err.what());
  }
}

std::string PipelineConfig::get(std::string_view key) const { return find_entry(key).get(*this); }

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries_table()) out.emplace_back(std::string(e.key.name), e.get(*this));
  return out;
}

void PipelineConfig::validate() const {
  try {
    roi.validate();
    loss.validate();
    features.validate();
    net.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  if (weight_dilate < 0) fail(ErrorCode::kConfig, "weights.dilate must be >= 0");
  if (post.max_rounds < 1) fail(ErrorCode::kConfig, "postproc.max_rounds must be >= 1");
  if (!(augment.zoom_min > 0.0 && augment.zoom_min <= augment.zoom_max)) {
    fail(ErrorCode::kConfig, "augment.zoom_min must be positive and not above augment.zoom_max");
  }
  if (augment.max_angle_deg < 0 || augment.max_shift_mm < 0 || augment.noise_sigma < 0 ||
      augment.max_elastic_mm < 0) {
    fail(ErrorCode::kConfig, "augment bounds must be non-negative");
  }
  if (ensemble.cv_folds < 2) fail(ErrorCode::kConfig, "classifier.cv_folds must be >= 2");
  if (ensemble.base.rf_trees < 1) fail(ErrorCode::kConfig, "classifier.rf_trees must be >= 1");
  if (ensemble.base.mlp_max_epochs < 1) fail(ErrorCode::kConfig, "classifier.mlp_max_epochs must be >= 1");
  if (!(ensemble.base.svm_c > 0.0)) fail(ErrorCode::kConfig, "classifier.svm_c must be positive");
  if (threads < 1) fail(ErrorCode::kConfig, "pipeline.threads must be >= 1");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries_table()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

std::string env_var_name(std::string_view key) {
  std::string out = "CMR_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void apply_config_text(PipelineConfig& cfg, std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

void apply_environment(PipelineConfig& cfg, const std::vector<std::pair<std::string, std::string>>& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind("CMR_", 0) != 0) continue;
    const auto& t = entries_table();
    const auto it = std::find_if(t.begin(), t.end(), [&](const Entry& e) { return env_var_name(e.key.name) == name; });
    if (it == t.end()) fail(ErrorCode::kConfig, "environment variable " + name + " names no config key");
    try {
      cfg.set(it->key.name, value);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, "environment variable " + name + ": " + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> process_environment() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string_view kv(*e);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void apply_assignment(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    fail(ErrorCode::kConfig, "expected key=value, got '" + std::string(assignment) + "'");
  }
  cfg.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& e : entries_table()) {
    out += "# " + std::string(e.key.help) + "\n";
    out += std::string(e.key.name) + " = " + e.get(cfg) + "\n";
  }
  return out;
}

}  // namespace cmr
