#include "cmr/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "bytes.hpp"
#include "cmr/error.hpp"
#include "cmr/numeric.hpp"
#include "cmr/rng.hpp"

namespace cmr {

using detail::ByteReader;
using detail::ByteWriter;

int Dataset::classes() const {
  if (y.empty()) return 0;
  return *std::max_element(y.begin(), y.end()) + 1;
}

void Dataset::validate() const {
  if (x.size() != y.size()) {
    fail(ErrorCode::kArgument, "dataset has " + std::to_string(x.size()) + " rows but " +
                                   std::to_string(y.size()) + " labels");
  }
  if (x.empty()) fail(ErrorCode::kArgument, "dataset is empty");
  const std::size_t d = x.front().size();
  if (d == 0) fail(ErrorCode::kArgument, "dataset has no features");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) fail(ErrorCode::kArgument, "row " + std::to_string(i) + " has wrong width");
    if (y[i] < 0) fail(ErrorCode::kArgument, "negative class label at row " + std::to_string(i));
    for (double v : x[i]) {
      if (!std::isfinite(v)) fail(ErrorCode::kArgument, "non-finite value at row " + std::to_string(i));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x.reserve(rows.size());
  out.y.reserve(rows.size());
  for (auto r : rows) {
    out.x.push_back(x.at(r));
    out.y.push_back(y.at(r));
  }
  return out;
}

// ---------------------------------------------------------------- scaler

Scaler Scaler::fit(const std::vector<RawRow>& rows) {
  if (rows.empty()) fail(ErrorCode::kArgument, "cannot fit a scaler on zero rows");
  const std::size_t d = rows.front().size();
  Scaler s;
  s.median.assign(d, 0.0);
  s.mean.assign(d, 0.0);
  s.stdev.assign(d, 1.0);
  for (const auto& r : rows) {
    if (r.size() != d) fail(ErrorCode::kArgument, "ragged feature rows");
  }
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> present;
    for (const auto& r : rows) {
      if (r[j]) present.push_back(*r[j]);
    }
    if (!present.empty()) s.median[j] = median_of(present);
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r[j] ? *r[j] : s.median[j]);
    s.mean[j] = *mean_of(col);
    const double sd = *population_stdev(col);
    s.stdev[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Scaler::apply(const RawRow& row) const {
  if (row.size() != mean.size()) {
    fail(ErrorCode::kArgument, "feature row has " + std::to_string(row.size()) +
                                   " values, scaler expects " + std::to_string(mean.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double v = row[j] ? *row[j] : median[j];
    out[j] = (v - mean[j]) / stdev[j];
  }
  return out;
}

std::vector<std::vector<double>> Scaler::apply(const std::vector<RawRow>& rows) const {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply(r));
  return out;
}

Scaler Scaler::select(std::span<const std::size_t> cols) const {
  Scaler s;
  for (auto c : cols) {
    s.median.push_back(median.at(c));
    s.mean.push_back(mean.at(c));
    s.stdev.push_back(stdev.at(c));
  }
  return s;
}

// ---------------------------------------------------------------- names

std::string_view classifier_name(ClassifierKind k) noexcept {
  switch (k) {
    case ClassifierKind::kGNB: return "GNB";
    case ClassifierKind::kRF: return "RF";
    case ClassifierKind::kMLP: return "MLP";
    case ClassifierKind::kSVM: return "SVM";
    case ClassifierKind::kLR: return "LR";
    case ClassifierKind::kKNN: return "KNN";
  }
  return "?";
}

ClassifierKind parse_classifier(std::string_view name) {
  for (auto k : {ClassifierKind::kGNB, ClassifierKind::kRF, ClassifierKind::kMLP, ClassifierKind::kSVM,
                 ClassifierKind::kLR, ClassifierKind::kKNN}) {
    if (classifier_name(k) == name) return k;
  }
  fail(ErrorCode::kArgument, "unknown classifier '" + std::string(name) + "'");
}

double Classifier::accuracy(const Dataset& ds) const {
  if (ds.size() == 0) fail(ErrorCode::kArgument, "accuracy of an empty dataset");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hit += predict(ds.x[i]) == ds.y[i];
  return static_cast<double>(hit) / static_cast<double>(ds.size());
}

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_input(const Classifier& c, std::span<const double> x) {
  if (x.size() != c.dims()) {
    fail(ErrorCode::kArgument, std::string(classifier_name(c.kind())) + " expects " +
                                   std::to_string(c.dims()) + " features, got " +
                                   std::to_string(x.size()));
  }
}

void check_trainable(const Dataset& ds) {
  ds.validate();
  std::set<int> present(ds.y.begin(), ds.y.end());
  if (present.size() < 2) fail(ErrorCode::kTraining, "training needs at least two classes");
}

}  // namespace

// ---------------------------------------------------------------- GNB

std::unique_ptr<GaussianNB> train_gnb(const Dataset& ds) {
  check_trainable(ds);
  const int k = ds.classes();
  const std::size_t d = ds.dims();
  auto m = std::make_unique<GaussianNB>();
  m->mean.assign(k, std::vector<double>(d, 0.0));
  m->var.assign(k, std::vector<double>(d, 0.0));
  m->log_prior.assign(k, -std::numeric_limits<double>::infinity());

  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col;
    for (const auto& row : ds.x) col.push_back(row[j]);
    const double sd = *population_stdev(col);
    max_var = std::max(max_var, sd * sd);
  }
  m->var_floor = max_var > 0.0 ? 1e-9 * max_var : 1e-9;

  for (int c = 0; c < k; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.y[i] == c) rows.push_back(i);
    }
    if (rows.empty()) continue;
    m->log_prior[c] = std::log(static_cast<double>(rows.size()) / static_cast<double>(ds.size()));
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> col;
      for (auto r : rows) col.push_back(ds.x[r][j]);
      const double mu = *mean_of(col);
      const double sd = *population_stdev(col);
      m->mean[c][j] = mu;
      m->var[c][j] = sd * sd + m->var_floor;
    }
  }
  return m;
}

std::vector<double> GaussianNB::log_posterior(std::span<const double> x) const {
  check_input(*this, x);
  std::vector<double> out(mean.size());
  for (std::size_t c = 0; c < mean.size(); ++c) {
    double s = log_prior[c];
    if (std::isinf(s)) {
      out[c] = s;
      continue;
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double dv = x[j] - mean[c][j];
      s -= 0.5 * (std::log(2.0 * std::numbers::pi * var[c][j]) + dv * dv / var[c][j]);
    }
    out[c] = s;
  }
  return out;
}

int GaussianNB::predict(std::span<const double> x) const { return argmax(log_posterior(x)); }

void GaussianNB::write(ByteWriter& w) const {
  w.f64s(log_prior);
  w.u64(mean.size());
  for (std::size_t c = 0; c < mean.size(); ++c) {
    w.f64s(mean[c]);
    w.f64s(var[c]);
  }
  w.f64(var_floor);
}

// ---------------------------------------------------------------- RF

namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 1.0;
  for (double c : counts) {
    const double p = c / total;
    s -= p * p;
  }
  return s;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double decrease = -1.0;  // weighted impurity decrease
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, int classes, std::size_t mtry, Rng& rng)
      : ds_(ds), k_(classes), mtry_(mtry), rng_(rng), importance_(ds.dims(), 0.0) {}

  std::vector<TreeNode> build(std::vector<std::size_t> samples) {
    total_ = static_cast<double>(samples.size());
    nodes_.clear();
    grow(std::move(samples));
    return std::move(nodes_);
  }

  const std::vector<double>& importance() const { return importance_; }

 private:
  std::vector<double> counts_of(const std::vector<std::size_t>& s) const {
    std::vector<double> c(k_, 0.0);
    for (auto i : s) c[ds_.y[i]] += 1.0;
    return c;
  }

  SplitChoice best_on_feature(const std::vector<std::size_t>& s, int f, double parent_gini) {
    order_.assign(s.begin(), s.end());
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return ds_.x[a][f] < ds_.x[b][f];
    });
    SplitChoice best;
    const double n = static_cast<double>(s.size());
    std::vector<double> left(k_, 0.0);
    std::vector<double> right = counts_of(s);
    for (std::size_t pos = 0; pos + 1 < order_.size(); ++pos) {
      const int lbl = ds_.y[order_[pos]];
      left[lbl] += 1.0;
      right[lbl] -= 1.0;
      const double a = ds_.x[order_[pos]][f];
      const double b = ds_.x[order_[pos + 1]][f];
      if (!(a < b)) continue;
      const double nl = static_cast<double>(pos + 1);
      const double nr = n - nl;
      const double dec = n * parent_gini - nl * gini(left, nl) - nr * gini(right, nr);
      if (dec > best.decrease) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best = {f, thr, dec};
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> s) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const auto counts = counts_of(s);
    const double n = static_cast<double>(s.size());
    nodes_[id].label = argmax(counts);
    const double g = gini(counts, n);
    if (g <= 0.0 || s.size() < 2) return id;

    // Draw mtry candidate features; if none of them can split the node,
    // keep drawing from the rest so impure nodes are always split when any
    // feature varies.
    std::vector<int> feats(ds_.dims());
    for (std::size_t j = 0; j < feats.size(); ++j) feats[j] = static_cast<int>(j);
    shuffle_range(feats.begin(), feats.end(), rng_);
    SplitChoice best;
    for (std::size_t t = 0; t < feats.size(); ++t) {
      if (t >= mtry_ && best.feature >= 0) break;
      const auto c = best_on_feature(s, feats[t], g);
      if (c.feature >= 0 && c.decrease > best.decrease) best = c;
    }
    if (best.feature < 0) return id;

    importance_[best.feature] += best.decrease / total_;
    std::vector<std::size_t> ls;
    std::vector<std::size_t> rs;
    for (auto i : s) {
      (ds_.x[i][best.feature] <= best.threshold ? ls : rs).push_back(i);
    }
    s.clear();
    s.shrink_to_fit();
    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    const int l = grow(std::move(ls));
    nodes_[id].left = l;
    const int r = grow(std::move(rs));
    nodes_[id].right = r;
    return id;
  }

  const Dataset& ds_;
  int k_;
  std::size_t mtry_;
  Rng& rng_;
  double total_ = 0.0;
  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> order_;
  std::vector<double> importance_;
};

int tree_predict(const std::vector<TreeNode>& t, std::span<const double> x) {
  int i = 0;
  while (t[i].feature >= 0) i = x[t[i].feature] <= t[i].threshold ? t[i].left : t[i].right;
  return t[i].label;
}

}  // namespace

std::unique_ptr<RandomForest> train_rf(const Dataset& ds, int trees, std::uint64_t seed) {
  check_trainable(ds);
  if (trees < 1) fail(ErrorCode::kArgument, "random forest needs at least one tree");
  auto m = std::make_unique<RandomForest>();
  m->n_classes = ds.classes();
  m->n_features = ds.dims();
  const std::size_t mtry =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(ds.dims()))));
  std::vector<std::vector<double>> imps;
  for (int t = 0; t < trees; ++t) {
    Rng rng(splitmix64(seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(t + 1)));
    std::vector<std::size_t> boot(ds.size());
    for (auto& b : boot) b = static_cast<std::size_t>(uniform_index(rng, ds.size()));
    TreeBuilder builder(ds, m->n_classes, mtry, rng);
    m->trees.push_back(builder.build(std::move(boot)));
    auto imp = builder.importance();
    const double s = compensated_sum(imp);
    if (s > 0.0) {
      for (auto& v : imp) v /= s;
    }
    imps.push_back(std::move(imp));
  }
  m->importance_mean.assign(ds.dims(), 0.0);
  m->importance_stdev.assign(ds.dims(), 0.0);
  for (std::size_t j = 0; j < ds.dims(); ++j) {
    std::vector<double> col;
    for (const auto& imp : imps) col.push_back(imp[j]);
    m->importance_mean[j] = *mean_of(col);
    m->importance_stdev[j] = *population_stdev(col);
  }
  return m;
}

int RandomForest::predict(std::span<const double> x) const {
  check_input(*this, x);
  std::vector<double> votes(n_classes, 0.0);
  for (const auto& t : trees) votes[tree_predict(t, x)] += 1.0;
  return argmax(votes);
}

void RandomForest::write(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(n_classes));
  w.u64(n_features);
  w.u64(trees.size());
  for (const auto& t : trees) {
    w.u64(t.size());
    for (const auto& n : t) {
      w.u32(static_cast<std::uint32_t>(n.feature));
      w.f64(n.threshold);
      w.u32(static_cast<std::uint32_t>(n.left));
      w.u32(static_cast<std::uint32_t>(n.right));
      w.u32(static_cast<std::uint32_t>(n.label));
    }
  }
  w.f64s(importance_mean);
  w.f64s(importance_stdev);
}

// ---------------------------------------------------------------- MLP

namespace {

DenseLayer glorot_layer(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.w.resize(in * out);
  l.b.assign(out, 0.0);
  const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& v : l.w) v = uniform(rng, -lim, lim);
  return l;
}

// a (n x in) -> z (n x out)
void dense_forward(const DenseLayer& l, const std::vector<double>& a, std::size_t n,
                   std::vector<double>& z) {
  z.assign(n * l.out, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double* ai = &a[s * l.in];
    double* zo = &z[s * l.out];
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* wr = &l.w[o * l.in];
      double acc = l.b[o];
      for (std::size_t i = 0; i < l.in; ++i) acc += wr[i] * ai[i];
      zo[o] = acc;
    }
  }
}

void softmax_rows(std::vector<double>& z, std::size_t n, std::size_t k) {
  for (std::size_t s = 0; s < n; ++s) {
    double* r = &z[s * k];
    const double mx = *std::max_element(r, r + k);
    double tot = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      r[c] = std::exp(r[c] - mx);
      tot += r[c];
    }
    for (std::size_t c = 0; c < k; ++c) r[c] /= tot;
  }
}

struct Adam {
  std::vector<double> m, v;
  double b1t = 1.0, b2t = 1.0;

  void step(std::vector<double>& p, const std::vector<double>& g, double lr) {
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    b1t *= b1;
    b2t *= b2;
    const double step = lr * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
    }
  }
};

// Full-batch softmax network training shared by the MLP and logistic
// regression (which is the same thing with no hidden layers).
MlpTrainingLog fit_network(std::vector<DenseLayer>& layers, const Dataset& ds, double lr, double l2,
                           int max_epochs, int patience, double tol) {
  const std::size_t n = ds.size();
  const std::size_t d = ds.dims();
  const std::size_t k = layers.back().out;
  std::vector<double> input(n * d);
  for (std::size_t s = 0; s < n; ++s) std::copy(ds.x[s].begin(), ds.x[s].end(), &input[s * d]);

  const std::size_t nl = layers.size();
  std::vector<std::vector<double>> acts(nl + 1);  // acts[0] = input, acts[l+1] = output of layer l
  acts[0] = input;
  std::vector<Adam> opt_w(nl), opt_b(nl);
  std::vector<double> delta, prev_delta, gw, gb;

  MlpTrainingLog log;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    for (std::size_t l = 0; l < nl; ++l) {
      dense_forward(layers[l], acts[l], n, acts[l + 1]);
      if (l + 1 < nl) {
        for (auto& v : acts[l + 1]) v = std::max(0.0, v);
      }
    }
    softmax_rows(acts[nl], n, k);

    CompensatedSum ce;
    for (std::size_t s = 0; s < n; ++s) {
      ce.add(-std::log(std::max(acts[nl][s * k + ds.y[s]], 1e-300)));
    }
    double wsq = 0.0;
    for (const auto& l : layers) {
      for (double w : l.w) wsq += w * w;
    }
    const double loss = ce.value() / static_cast<double>(n) + 0.5 * l2 * wsq / static_cast<double>(n);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kTraining, "network loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (epoch == 0) log.initial_loss = loss;
    log.epochs = epoch + 1;
    if (loss < best - tol) {
      best = loss;
      stale = 0;
    } else if (++stale >= patience) {
      log.early_stopped = true;
      break;
    }

    // dLoss/dz of the output layer
    delta = acts[nl];
    for (std::size_t s = 0; s < n; ++s) delta[s * k + ds.y[s]] -= 1.0;
    for (auto& v : delta) v /= static_cast<double>(n);

    for (std::size_t li = nl; li-- > 0;) {
      DenseLayer& L = layers[li];
      const auto& a = acts[li];
      gw.assign(L.w.size(), 0.0);
      gb.assign(L.out, 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        const double* ds_row = &delta[s * L.out];
        const double* a_row = &a[s * L.in];
        for (std::size_t o = 0; o < L.out; ++o) {
          const double g = ds_row[o];
          if (g == 0.0) continue;
          gb[o] += g;
          double* gwr = &gw[o * L.in];
          for (std::size_t i = 0; i < L.in; ++i) gwr[i] += g * a_row[i];
        }
      }
      for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += l2 * L.w[i] / static_cast<double>(n);
      if (li > 0) {
        prev_delta.assign(n * L.in, 0.0);
        for (std::size_t s = 0; s < n; ++s) {
          const double* ds_row = &delta[s * L.out];
          double* pd = &prev_delta[s * L.in];
          for (std::size_t o = 0; o < L.out; ++o) {
            const double g = ds_row[o];
            if (g == 0.0) continue;
            const double* wr = &L.w[o * L.in];
            for (std::size_t i = 0; i < L.in; ++i) pd[i] += g * wr[i];
          }
          const double* a_row = &a[s * L.in];
          for (std::size_t i = 0; i < L.in; ++i) {
            if (a_row[i] <= 0.0) pd[i] = 0.0;  // ReLU
          }
        }
      }
      opt_w[li].step(L.w, gw, lr);
      opt_b[li].step(L.b, gb, lr);
      if (li > 0) delta.swap(prev_delta);
    }
  }
  log.best_loss = best;
  if (!(best < log.initial_loss)) {
    fail(ErrorCode::kTraining, "network did not converge: loss " + std::to_string(log.initial_loss) +
                                   " never decreased over " + std::to_string(log.epochs) + " epochs");
  }
  return log;
}

std::vector<double> network_forward(const std::vector<DenseLayer>& layers, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> z;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    dense_forward(layers[l], a, 1, z);
    if (l + 1 < layers.size()) {
      for (auto& v : z) v = std::max(0.0, v);
    }
    a.swap(z);
  }
  softmax_rows(a, 1, a.size());
  return a;
}

void write_layers(const std::vector<DenseLayer>& layers, ByteWriter& w) {
  w.u64(layers.size());
  for (const auto& l : layers) {
    w.u64(l.in);
    w.u64(l.out);
    w.f64s(l.w);
    w.f64s(l.b);
  }
}

std::vector<DenseLayer> read_layers(ByteReader& r) {
  std::vector<DenseLayer> layers(r.count(16));
  for (auto& l : layers) {
    l.in = r.u64();
    l.out = r.u64();
    l.w = r.f64s();
    l.b = r.f64s();
    if (l.w.size() != l.in * l.out || l.b.size() != l.out) {
      fail(ErrorCode::kModel, "model file: inconsistent dense layer shape");
    }
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in != layers[i - 1].out) fail(ErrorCode::kModel, "model file: layer widths do not chain");
  }
  if (layers.empty()) fail(ErrorCode::kModel, "model file: network without layers");
  return layers;
}

}  // namespace

std::unique_ptr<Mlp> train_mlp(const Dataset& ds, const ClassifierSpec& spec) {
  check_trainable(ds);
  if (spec.mlp_max_epochs < 1 || spec.mlp_patience < 1 || !(spec.mlp_lr > 0.0)) {
    fail(ErrorCode::kArgument, "mlp: epochs, patience and learning rate must be positive");
  }
  auto m = std::make_unique<Mlp>();
  Rng rng(spec.seed);
  std::size_t in = ds.dims();
  for (int h : spec.mlp_hidden) {
    if (h < 1) fail(ErrorCode::kArgument, "mlp: hidden layer sizes must be positive");
    m->layers.push_back(glorot_layer(in, static_cast<std::size_t>(h), rng));
    in = static_cast<std::size_t>(h);
  }
  m->layers.push_back(glorot_layer(in, static_cast<std::size_t>(ds.classes()), rng));
  m->log = fit_network(m->layers, ds, spec.mlp_lr, spec.mlp_l2, spec.mlp_max_epochs, spec.mlp_patience,
                       spec.mlp_tol);
  return m;
}

std::vector<double> Mlp::probabilities(std::span<const double> x) const {
  check_input(*this, x);
  return network_forward(layers, x);
}

int Mlp::predict(std::span<const double> x) const { return argmax(probabilities(x)); }

void Mlp::write(ByteWriter& w) const { write_layers(layers, w); }

// ---------------------------------------------------------------- SVM

namespace {

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::exp(-gamma * s);
}

// C-SVC dual by SMO with second-order working set selection.
BinarySvm smo(const std::vector<std::vector<double>>& x, const std::vector<double>& y, double c,
              double gamma, double eps) {
  const std::size_t n = x.size();
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = rbf(x[i], x[j], gamma);
  }
  const auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K[i * n + j]; };
  constexpr double tau = 1e-12;
  std::vector<double> a(n, 0.0);
  std::vector<double> G(n, -1.0);
  const auto upper = [&](std::size_t i) { return a[i] >= c; };
  const auto lower = [&](std::size_t i) { return a[i] <= 0.0; };

  const long max_iter = std::max<long>(10000000, 100 * static_cast<long>(n));
  long iter = 0;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    long gi = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          gi = static_cast<long>(t);
        }
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t];
        gi = static_cast<long>(t);
      }
    }
    if (gi < 0) break;
    const auto i = static_cast<std::size_t>(gi);
    double gmax2 = -std::numeric_limits<double>::infinity();
    long gj = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
        if (diff > 0.0) {
          double quad = K[i * n + i] + K[t * n + t] - 2.0 * y[i] * Q(i, t);
          if (quad <= 0.0) quad = tau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            gj = static_cast<long>(t);
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
        if (diff > 0.0) {
          double quad = K[i * n + i] + K[t * n + t] + 2.0 * y[i] * Q(i, t);
          if (quad <= 0.0) quad = tau;
          const double obj = -(diff * diff) / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            gj = static_cast<long>(t);
          }
        }
      }
    }
    if (gmax + gmax2 < eps || gj < 0) break;
    const auto j = static_cast<std::size_t>(gj);

    const double old_ai = a[i];
    const double old_aj = a[j];
    if (y[i] != y[j]) {
      double quad = K[i * n + i] + K[j * n + j] + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = c - diff;
        }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = K[i * n + i] + K[j * n + j] - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = sum - c;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) {
          a[j] = c;
          a[i] = sum - c;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }
    const double dai = a[i] - old_ai;
    const double daj = a[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * dai + Q(j, t) * daj;
  }

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  BinarySvm m;
  m.rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;
  m.iterations = static_cast<int>(iter);
  for (std::size_t t = 0; t < n; ++t) {
    if (a[t] > 0.0) {
      m.sv.push_back(x[t]);
      m.coef.push_back(a[t] * y[t]);
      m.alpha.push_back(a[t]);
    }
  }
  return m;
}

}  // namespace

std::unique_ptr<Svm> train_svm_rbf(const Dataset& ds, double c, std::optional<double> gamma, double tol) {
  check_trainable(ds);
  if (!(c > 0.0)) fail(ErrorCode::kArgument, "svm: C must be positive");
  if (gamma && !(*gamma > 0.0)) fail(ErrorCode::kArgument, "svm: gamma must be positive");
  if (!(tol > 0.0)) fail(ErrorCode::kArgument, "svm: tolerance must be positive");
  auto m = std::make_unique<Svm>();
  m->n_classes = ds.classes();
  m->n_features = ds.dims();
  m->c = c;
  if (gamma) {
    m->gamma = *gamma;
  } else {
    std::vector<double> all;
    for (const auto& r : ds.x) all.insert(all.end(), r.begin(), r.end());
    const double sd = *population_stdev(all);
    const double var = sd * sd;
    m->gamma = 1.0 / (static_cast<double>(ds.dims()) * (var > 0.0 ? var : 1.0));
  }
  for (int p = 0; p < m->n_classes; ++p) {
    for (int q = p + 1; q < m->n_classes; ++q) {
      std::vector<std::vector<double>> x;
      std::vector<double> y;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.y[i] == p || ds.y[i] == q) {
          x.push_back(ds.x[i]);
          y.push_back(ds.y[i] == p ? 1.0 : -1.0);
        }
      }
      if (std::count(y.begin(), y.end(), 1.0) == 0 || std::count(y.begin(), y.end(), -1.0) == 0) {
        continue;  // pair involves a class absent from training
      }
      BinarySvm b = smo(x, y, c, m->gamma, tol);
      b.pos = p;
      b.neg = q;
      m->machines.push_back(std::move(b));
    }
  }
  return m;
}

double Svm::decision(const BinarySvm& b, std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < b.sv.size(); ++i) s += b.coef[i] * rbf(b.sv[i], x, gamma);
  return s - b.rho;
}

int Svm::predict(std::span<const double> x) const {
  check_input(*this, x);
  std::vector<double> votes(n_classes, 0.0);
  for (const auto& b : machines) votes[decision(b, x) > 0.0 ? b.pos : b.neg] += 1.0;
  return argmax(votes);
}

void Svm::write(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(n_classes));
  w.u64(n_features);
  w.f64(gamma);
  w.f64(c);
  w.u64(machines.size());
  for (const auto& b : machines) {
    w.u32(static_cast<std::uint32_t>(b.pos));
    w.u32(static_cast<std::uint32_t>(b.neg));
    w.f64(b.rho);
    w.u64(b.sv.size());
    for (std::size_t i = 0; i < b.sv.size(); ++i) {
      w.f64s(b.sv[i]);
      w.f64(b.coef[i]);
      w.f64(b.alpha[i]);
    }
  }
}

// ---------------------------------------------------------------- LR, KNN

namespace {

struct LogisticRegression final : Classifier {
  std::vector<DenseLayer> layers;  // exactly one

  ClassifierKind kind() const noexcept override { return ClassifierKind::kLR; }
  int classes() const noexcept override { return static_cast<int>(layers.front().out); }
  std::size_t dims() const noexcept override { return layers.front().in; }
  int predict(std::span<const double> x) const override {
    check_input(*this, x);
    return argmax(network_forward(layers, x));
  }
  void write(ByteWriter& w) const override { write_layers(layers, w); }
};

struct Knn final : Classifier {
  int k = 5;
  int n_classes = 0;
  Dataset train;

  ClassifierKind kind() const noexcept override { return ClassifierKind::kKNN; }
  int classes() const noexcept override { return n_classes; }
  std::size_t dims() const noexcept override { return train.dims(); }
  int predict(std::span<const double> x) const override {
    check_input(*this, x);
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = x[j] - train.x[i][j];
        s += v * v;
      }
      d.emplace_back(s, i);
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<long>(kk), d.end());
    std::vector<double> votes(n_classes, 0.0);
    for (std::size_t i = 0; i < kk; ++i) votes[train.y[d[i].second]] += 1.0;
    const double top = *std::max_element(votes.begin(), votes.end());
    // Tied classes: the one owning the nearest neighbour wins.
    for (std::size_t i = 0; i < kk; ++i) {
      const int lbl = train.y[d[i].second];
      if (votes[lbl] == top) return lbl;
    }
    return argmax(votes);
  }
  void write(ByteWriter& w) const override {
    w.u32(static_cast<std::uint32_t>(k));
    w.u32(static_cast<std::uint32_t>(n_classes));
    w.u64(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      w.f64s(train.x[i]);
      w.u32(static_cast<std::uint32_t>(train.y[i]));
    }
  }
};

}  // namespace

// ---------------------------------------------------------------- dispatch

std::unique_ptr<Classifier> train_classifier(const ClassifierSpec& spec, const Dataset& ds) {
  switch (spec.kind) {
    case ClassifierKind::kGNB: return train_gnb(ds);
    case ClassifierKind::kRF: return train_rf(ds, spec.rf_trees, spec.seed);
    case ClassifierKind::kMLP: return train_mlp(ds, spec);
    case ClassifierKind::kSVM: return train_svm_rbf(ds, spec.svm_c, spec.svm_gamma, spec.svm_tol);
    case ClassifierKind::kLR: {
      check_trainable(ds);
      auto m = std::make_unique<LogisticRegression>();
      Rng rng(spec.seed);
      m->layers.push_back(glorot_layer(ds.dims(), static_cast<std::size_t>(ds.classes()), rng));
      fit_network(m->layers, ds, 1e-2, spec.lr_l2, spec.lr_epochs, 200, 1e-7);
      return m;
    }
    case ClassifierKind::kKNN: {
      check_trainable(ds);
      if (spec.knn_k < 1) fail(ErrorCode::kArgument, "knn: k must be positive");
      auto m = std::make_unique<Knn>();
      m->k = spec.knn_k;
      m->n_classes = ds.classes();
      m->train = ds;
      return m;
    }
  }
  fail(ErrorCode::kArgument, "unknown classifier kind");
}

void write_classifier(const Classifier& c, ByteWriter& w) {
  w.u8(static_cast<std::uint8_t>(c.kind()));
  c.write(w);
}

std::unique_ptr<Classifier> read_classifier(ByteReader& r) {
  const auto tag = r.u8();
  switch (static_cast<ClassifierKind>(tag)) {
    case ClassifierKind::kGNB: {
      auto m = std::make_unique<GaussianNB>();
      m->log_prior = r.f64s();
      const auto k = r.count(16);
      for (std::size_t c = 0; c < k; ++c) {
        m->mean.push_back(r.f64s());
        m->var.push_back(r.f64s());
      }
      m->var_floor = r.f64();
      if (m->log_prior.size() != k || k == 0) fail(ErrorCode::kModel, "model file: bad GNB block");
      for (std::size_t c = 0; c < k; ++c) {
        if (m->mean[c].size() != m->mean[0].size() || m->var[c].size() != m->mean[0].size()) {
          fail(ErrorCode::kModel, "model file: bad GNB block");
        }
      }
      return m;
    }
    case ClassifierKind::kRF: {
      auto m = std::make_unique<RandomForest>();
      m->n_classes = static_cast<int>(r.u32());
      m->n_features = r.u64();
      const auto nt = r.count(8);
      for (std::size_t t = 0; t < nt; ++t) {
        std::vector<TreeNode> nodes(r.count(24));
        for (auto& nd : nodes) {
          nd.feature = static_cast<int>(r.u32());
          nd.threshold = r.f64();
          nd.left = static_cast<int>(r.u32());
          nd.right = static_cast<int>(r.u32());
          nd.label = static_cast<int>(r.u32());
        }
        const auto nn = static_cast<int>(nodes.size());
        for (const auto& nd : nodes) {
          const bool leaf = nd.feature < 0;
          const bool ok = nd.label >= 0 && nd.label < m->n_classes &&
                          (leaf || (nd.feature < static_cast<int>(m->n_features) && nd.left > 0 &&
                                    nd.left < nn && nd.right > 0 && nd.right < nn));
          if (!ok) fail(ErrorCode::kModel, "model file: bad tree node");
        }
        if (nodes.empty()) fail(ErrorCode::kModel, "model file: empty tree");
        m->trees.push_back(std::move(nodes));
      }
      m->importance_mean = r.f64s();
      m->importance_stdev = r.f64s();
      return m;
    }
    case ClassifierKind::kMLP: {
      auto m = std::make_unique<Mlp>();
      m->layers = read_layers(r);
      return m;
    }
    case ClassifierKind::kSVM: {
      auto m = std::make_unique<Svm>();
      m->n_classes = static_cast<int>(r.u32());
      m->n_features = r.u64();
      m->gamma = r.f64();
      m->c = r.f64();
      const auto nm = r.count(16);
      for (std::size_t i = 0; i < nm; ++i) {
        BinarySvm b;
        b.pos = static_cast<int>(r.u32());
        b.neg = static_cast<int>(r.u32());
        b.rho = r.f64();
        const auto ns = r.count(16);
        for (std::size_t s = 0; s < ns; ++s) {
          b.sv.push_back(r.f64s());
          b.coef.push_back(r.f64());
          b.alpha.push_back(r.f64());
          if (b.sv.back().size() != m->n_features) fail(ErrorCode::kModel, "model file: bad support vector");
        }
        if (b.pos < 0 || b.neg < 0 || b.pos >= m->n_classes || b.neg >= m->n_classes) {
          fail(ErrorCode::kModel, "model file: bad class pair");
        }
        m->machines.push_back(std::move(b));
      }
      return m;
    }
    case ClassifierKind::kLR: {
      auto m = std::make_unique<LogisticRegression>();
      m->layers = read_layers(r);
      return m;
    }
    case ClassifierKind::kKNN: {
      auto m = std::make_unique<Knn>();
      m->k = static_cast<int>(r.u32());
      m->n_classes = static_cast<int>(r.u32());
      const auto n = r.count(12);
      for (std::size_t i = 0; i < n; ++i) {
        m->train.x.push_back(r.f64s());
        m->train.y.push_back(static_cast<int>(r.u32()));
      }
      m->train.validate();
      return m;
    }
  }
  fail(ErrorCode::kModel, "model file: unknown classifier tag " + std::to_string(tag));
}

// ---------------------------------------------------------------- CV

std::vector<int> stratified_folds(const std::vector<int>& y, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::kArgument, "cross-validation needs k >= 2");
  if (y.empty()) fail(ErrorCode::kArgument, "cross-validation on an empty dataset");
  const int nc = *std::max_element(y.begin(), y.end()) + 1;
  std::vector<int> fold(y.size(), -1);
  Rng rng(seed);
  int start = 0;
  for (int c = 0; c < nc; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    if (static_cast<int>(idx.size()) < k) {
      fail(ErrorCode::kStratification, "class " + std::to_string(c) + " has " +
                                           std::to_string(idx.size()) + " samples, fewer than k = " +
                                           std::to_string(k));
    }
    shuffle_range(idx.begin(), idx.end(), rng);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      fold[idx[p]] = static_cast<int>((static_cast<std::size_t>(start) + p) % static_cast<std::size_t>(k));
    }
    start = static_cast<int>((static_cast<std::size_t>(start) + idx.size()) % static_cast<std::size_t>(k));
  }
  return fold;
}

CvResult cross_validate(const std::vector<RawRow>& rows, const std::vector<int>& y,
                        const ClassifierSpec& spec, int k, std::uint64_t seed) {
  if (rows.size() != y.size()) fail(ErrorCode::kArgument, "rows and labels differ in length");
  CvResult res;
  res.fold_of = stratified_folds(y, k, seed);
  for (int f = 0; f < k; ++f) {
    std::vector<RawRow> tr_rows;
    std::vector<int> tr_y;
    std::vector<std::size_t> va;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (res.fold_of[i] == f) {
        va.push_back(i);
      } else {
        tr_rows.push_back(rows[i]);
        tr_y.push_back(y[i]);
      }
    }
    const Scaler sc = Scaler::fit(tr_rows);
    Dataset tr{sc.apply(tr_rows), tr_y};
    const auto model = train_classifier(spec, tr);
    std::size_t hit = 0;
    for (auto i : va) hit += model->predict(sc.apply(rows[i])) == y[i];
    res.fold_accuracy.push_back(static_cast<double>(hit) / static_cast<double>(va.size()));
  }
  res.mean = *mean_of(res.fold_accuracy);
  res.stdev = *population_stdev(res.fold_accuracy);
  return res;
}

std::vector<std::string> select_classifiers(const std::vector<NamedScore>& scores, double threshold) {
  std::vector<std::string> keep;
  for (const auto& s : scores) {
    if (s.score > threshold) keep.push_back(s.name);
  }
  if (keep.empty()) {
    std::string msg = "no classifier scored above " + std::to_string(threshold) + ":";
    for (const auto& s : scores) msg += " " + s.name + "=" + std::to_string(s.score);
    fail(ErrorCode::kSelection, msg);
  }
  return keep;
}

}  // namespace cmr
