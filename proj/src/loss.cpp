#include "cmr/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cmr/edges.hpp"
#include "cmr/numeric.hpp"

namespace cmr {

ClassField::ClassField(std::size_t classes, Dims4 grid, double fill)
    : classes_(classes),
      voxels_(grid[0] * grid[1] * grid[2] * grid[3]),
      grid_(grid),
      data_(classes * grid[0] * grid[1] * grid[2] * grid[3], fill) {
  if (classes_ == 0 || voxels_ == 0) fail(ErrorCode::kArgument, "class field must be non-empty");
}

ClassField class_field_from_volume(const ScalarVolume& v) {
  ClassField f(v.nt(), {v.nx(), v.ny(), v.nz(), 1});
  const auto src = v.values();
  for (std::size_t i = 0; i < src.size(); ++i) f.values()[i] = src[i];
  return f;
}

ScalarVolume class_field_to_volume(const ClassField& f, Spacing4 spacing) {
  const Dims4& g = f.grid();
  if (g[3] != 1) fail(ErrorCode::kArgument, "class field grid must be 3D to be written as a volume");
  std::vector<float> data(f.values().size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(f.values()[i]);
  spacing[3] = 1.0;
  return ScalarVolume({g[0], g[1], g[2], f.classes()}, spacing, std::move(data), 4);
}

namespace {

void check_labels(const ClassField& f, const LabelVolume& t) {
  const Dims4& g = f.grid();
  if (t.size() != f.voxels() || t.nx() != g[0] || t.ny() != g[1]) {
    fail(ErrorCode::kArgument, "label grid does not match the class field grid");
  }
  for (const auto l : t.values()) {
    if (l >= f.classes()) {
      fail(ErrorCode::kArgument, "label " + std::to_string(l) + " exceeds the class count " +
                                     std::to_string(f.classes()));
    }
  }
}

void check_weights(const ClassField& f, const WeightMap* w) {
  if (w && w->size() != f.voxels()) {
    fail(ErrorCode::kArgument, "weight map size does not match the class field");
  }
}

}  // namespace

WeightMap WeightMapTerms::total() const {
  WeightMap out = class_term;
  auto dst = out.values();
  const auto add = contour_term.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += add[i];
  return out;
}

WeightMapTerms weight_map_terms(const LabelVolume& lbl, int dilate_iters, const LabelSchema& schema) {
  validate_labels(lbl, schema);
  if (dilate_iters < 0) fail(ErrorCode::kArgument, "dilate_iters must be >= 0");
  WeightMapTerms out{lbl.like<double>(0.0), lbl.like<double>(0.0)};
  const double n = static_cast<double>(lbl.slice_size());
  for (std::size_t t = 0; t < lbl.nt(); ++t) {
    for (std::size_t z = 0; z < lbl.nz(); ++z) {
      const Image<std::uint8_t> s = lbl.slice(z, t);
      Image<double> cls(s.nx(), s.ny(), 0.0);
      Image<double> con(s.nx(), s.ny(), 0.0);
      for (const auto& c : schema.classes()) {
        Mask2 mask(s.nx(), s.ny(), 0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (s.values()[i] == c.id) {
            mask.values()[i] = 1;
            ++count;
          }
        }
        if (count == 0) continue;
        const double wt = n / static_cast<double>(count);
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (mask.values()[i]) cls.values()[i] += wt;
        }
        Mask2 contour = dilate_cross(canny_edges(to_real(mask), 1.0, 0.1, 0.2), dilate_iters);
        std::size_t ccount = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          contour.values()[i] = static_cast<std::uint8_t>(contour.values()[i] && mask.values()[i]);
          ccount += contour.values()[i];
        }
        if (ccount == 0) continue;
        const double wc = n / static_cast<double>(ccount);
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (contour.values()[i]) con.values()[i] += wc;
        }
      }
      out.class_term.set_slice(z, t, cls);
      out.contour_term.set_slice(z, t, con);
    }
  }
  return out;
}

WeightMap build_weight_map(const LabelVolume& lbl, int dilate_iters, const LabelSchema& schema) {
  return weight_map_terms(lbl, dilate_iters, schema).total();
}

void LossConfig::validate() const {
  if (!(epsilon > 0.0)) fail(ErrorCode::kArgument, "loss: epsilon must be positive");
  if (!(lambda >= 0.0 && gamma >= 0.0 && eta >= 0.0)) {
    fail(ErrorCode::kArgument, "loss: lambda, gamma and eta must be non-negative");
  }
}

ClassField softmax(const ClassField& z) {
  ClassField p(z.classes(), z.grid());
  for (std::size_t v = 0; v < z.voxels(); ++v) {
    double mx = z(0, v);
    for (std::size_t c = 1; c < z.classes(); ++c) mx = std::max(mx, z(c, v));
    double total = 0.0;
    for (std::size_t c = 0; c < z.classes(); ++c) {
      const double e = std::exp(z(c, v) - mx);
      p(c, v) = e;
      total += e;
    }
    for (std::size_t c = 0; c < z.classes(); ++c) p(c, v) /= total;
  }
  return p;
}

double weighted_ce(const ClassField& p, const LabelVolume& t, const WeightMap* w,
                   LossDiagnostics* diag) {
  check_labels(p, t);
  check_weights(p, w);
  CompensatedSum acc;
  std::size_t clamped = 0;
  const auto labels = t.values();
  for (std::size_t v = 0; v < p.voxels(); ++v) {
    double q = p(labels[v], v);
    if (q < kLogClamp) {
      q = kLogClamp;
      ++clamped;
    }
    const double wv = w ? w->values()[v] : 1.0;
    acc.add(-wv * std::log(q));
  }
  if (diag) diag->clamped += clamped;
  return acc.value();
}

double soft_dice_class(std::span<const double> p, std::span<const std::uint8_t> g, double eps,
                       bool two_factor) {
  if (p.size() != g.size()) fail(ErrorCode::kArgument, "soft dice: length mismatch");
  if (!(eps > 0.0)) fail(ErrorCode::kArgument, "soft dice: epsilon must be positive");
  CompensatedSum inter;
  CompensatedSum denom;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i] ? 1.0 : 0.0;
    inter.add(p[i] * gi);
    denom.add(p[i] * p[i] + gi);
  }
  const double a = two_factor ? 2.0 : 1.0;
  return (a * inter.value() + eps) / (denom.value() + eps);
}

std::vector<std::optional<double>> minibatch_class_weights(const LabelVolume& t, std::size_t classes) {
  if (t.size() == 0) fail(ErrorCode::kArgument, "mini-batch is empty");
  std::vector<std::size_t> counts(classes, 0);
  for (const auto l : t.values()) {
    if (l >= classes) fail(ErrorCode::kArgument, "label exceeds class count");
    ++counts[l];
  }
  std::vector<std::optional<double>> w(classes);
  const double m = static_cast<double>(t.size());
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] > 0) w[c] = m / static_cast<double>(counts[c]);
  }
  return w;
}

namespace {

struct DiceTerms {
  std::vector<std::optional<double>> weights;
  std::vector<double> inter;  // sum p g
  std::vector<double> denom;  // sum p^2 + g^2
  double weight_sum = 0.0;
};

DiceTerms dice_terms(const ClassField& p, const LabelVolume& t) {
  DiceTerms d;
  d.weights = minibatch_class_weights(t, p.classes());
  d.inter.assign(p.classes(), 0.0);
  d.denom.assign(p.classes(), 0.0);
  const auto labels = t.values();
  for (std::size_t c = 0; c < p.classes(); ++c) {
    if (!d.weights[c]) continue;
    CompensatedSum inter;
    CompensatedSum denom;
    for (std::size_t v = 0; v < p.voxels(); ++v) {
      const double g = labels[v] == c ? 1.0 : 0.0;
      const double q = p(c, v);
      inter.add(q * g);
      denom.add(q * q + g);
    }
    d.inter[c] = inter.value();
    d.denom[c] = denom.value();
    d.weight_sum += *d.weights[c];
  }
  return d;
}

}  // namespace

double dice_loss(const ClassField& p, const LabelVolume& t, const LossConfig& cfg) {
  cfg.validate();
  check_labels(p, t);
  const DiceTerms d = dice_terms(p, t);
  const double a = cfg.dice_two_factor ? 2.0 : 1.0;
  CompensatedSum num;
  for (std::size_t c = 0; c < p.classes(); ++c) {
    if (!d.weights[c]) continue;
    num.add(*d.weights[c] * (a * d.inter[c] + cfg.epsilon) / (d.denom[c] + cfg.epsilon));
  }
  return 1.0 - num.value() / d.weight_sum;
}

LossBreakdown total_loss_from_probs(const ClassField& p, const LabelVolume& t, const WeightMap* w,
                                    const LossConfig& cfg, double l2) {
  cfg.validate();
  LossDiagnostics diag;
  LossBreakdown b;
  b.ce = weighted_ce(p, t, w, &diag);
  b.dice_loss = dice_loss(p, t, cfg);
  b.l2_term = cfg.eta * l2;
  b.clamped = diag.clamped;
  b.total = cfg.lambda * b.ce + cfg.gamma * b.dice_loss + b.l2_term;
  return b;
}

LossBreakdown total_loss(const ClassField& z, const LabelVolume& t, const WeightMap* w,
                         const LossConfig& cfg, double l2) {
  return total_loss_from_probs(softmax(z), t, w, cfg, l2);
}

ClassField total_loss_grad(const ClassField& z, const LabelVolume& t, const WeightMap* w,
                           const LossConfig& cfg) {
  cfg.validate();
  check_labels(z, t);
  check_weights(z, w);
  const ClassField p = softmax(z);
  const std::size_t nc = z.classes();
  const auto labels = t.values();

  // G(v, l) = dLoss/dp(l, v) for the Dice term; the CE term is folded in
  // directly below since its softmax chain collapses to w (p - onehot).
  ClassField g(nc, z.grid(), 0.0);
  if (cfg.gamma != 0.0) {
    const DiceTerms d = dice_terms(p, t);
    const double a = cfg.dice_two_factor ? 2.0 : 1.0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (!d.weights[c]) continue;
      const double num = a * d.inter[c] + cfg.epsilon;
      const double den = d.denom[c] + cfg.epsilon;
      const double scale = -cfg.gamma * *d.weights[c] / d.weight_sum;
      for (std::size_t v = 0; v < z.voxels(); ++v) {
        const double gv = labels[v] == c ? 1.0 : 0.0;
        const double ddice = (a * gv * den - num * 2.0 * p(c, v)) / (den * den);
        g(c, v) = scale * ddice;
      }
    }
  }

  ClassField grad(nc, z.grid(), 0.0);
  for (std::size_t v = 0; v < z.voxels(); ++v) {
    double dot = 0.0;
    for (std::size_t l = 0; l < nc; ++l) dot += g(l, v) * p(l, v);
    const double wv = w ? w->values()[v] : 1.0;
    const bool clamped = p(labels[v], v) < kLogClamp;
    for (std::size_t k = 0; k < nc; ++k) {
      double val = p(k, v) * (g(k, v) - dot);
      if (cfg.lambda != 0.0 && !clamped) {
        val += cfg.lambda * wv * (p(k, v) - (labels[v] == k ? 1.0 : 0.0));
      }
      grad(k, v) = val;
    }
  }
  return grad;
}

}  // namespace cmr
