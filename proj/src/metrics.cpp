#include "cmr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cmr/numeric.hpp"

namespace cmr {

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) {
    fail(ErrorCode::kArgument, "confusion: prediction has " + std::to_string(pred.size()) +
                                   " voxels, ground truth " + std::to_string(gt.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

Overlap dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  const auto c = confusion(pred, gt);
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return {1.0, true};
  return {2.0 * static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

Overlap jaccard(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  const auto c = confusion(pred, gt);
  const auto uni = c.tp + c.fp + c.fn;
  if (uni == 0) return {1.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(uni), false};
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Rates rates(const ConfusionCounts& c) {
  return {ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp), ratio(c.tp, c.tp + c.fp),
          ratio(c.tn, c.tn + c.fn)};
}

namespace {

struct Point3 {
  long x, y, z;
};

std::vector<Point3> points_of(std::span<const std::uint8_t> m, Dims3 d) {
  std::vector<Point3> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    out.push_back({static_cast<long>(i % d[0]), static_cast<long>((i / d[0]) % d[1]),
                   static_cast<long>(i / (d[0] * d[1]))});
  }
  return out;
}

// Same association order as the distance transform: x, then y, then z.
double squared_mm(const Point3& a, const Point3& b, const Spacing3& s) {
  const double dx = static_cast<double>(a.x - b.x) * s[0];
  const double dy = static_cast<double>(a.y - b.y) * s[1];
  const double dz = static_cast<double>(a.z - b.z) * s[2];
  return ((dx * dx) + (dy * dy)) + (dz * dz);
}

double directed_sq(const std::vector<Point3>& from, const std::vector<Point3>& to, const Spacing3& s) {
  double worst = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) {
      best = std::min(best, squared_mm(p, q, s));
      if (best <= worst) break;  // cannot raise the running maximum
    }
    worst = std::max(worst, best);
  }
  return worst;
}

void check_masks(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, Dims3 d,
                 Spacing3 s) {
  if (a.size() != d[0] * d[1] * d[2] || b.size() != a.size()) {
    fail(ErrorCode::kArgument, "hausdorff: mask sizes do not match dims");
  }
  for (double x : s) {
    if (!(x > 0.0)) fail(ErrorCode::kArgument, "hausdorff: spacing must be positive");
  }
  const auto nonempty = [](std::span<const std::uint8_t> m) {
    return std::any_of(m.begin(), m.end(), [](auto v) { return v != 0; });
  };
  if (!nonempty(a) || !nonempty(b)) {
    fail(ErrorCode::kUndefinedDistance, "hausdorff distance is undefined for an empty mask");
  }
}

// 1D lower envelope of parabolas over f, positions i * sp. In-place.
void edt_1d(std::vector<double>& f, std::size_t n, std::size_t stride, std::size_t base, double sp,
            std::vector<double>& buf, std::vector<std::size_t>& v, std::vector<double>& zb) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  buf.resize(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = f[base + i * stride];
  v.resize(n);
  zb.resize(n + 1);
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (buf[q] == inf) continue;
    if (!any) {
      v[0] = q;
      zb[0] = -inf;
      zb[1] = inf;
      k = 0;
      any = true;
      continue;
    }
    const double aq = static_cast<double>(q) * sp;
    double s = 0.0;
    while (true) {
      const double av = static_cast<double>(v[k]) * sp;
      s = ((buf[q] + aq * aq) - (buf[v[k]] + av * av)) / (2.0 * (aq - av));
      if (s <= zb[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= zb[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      zb[0] = -inf;
      zb[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    zb[k] = s;
    zb[k + 1] = inf;
  }
  if (!any) return;
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double aq = static_cast<double>(q) * sp;
    while (zb[j + 1] < aq) ++j;
    const double d = static_cast<double>(static_cast<long>(q) - static_cast<long>(v[j])) * sp;
    f[base + q * stride] = (d * d) + buf[v[j]];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(std::span<const std::uint8_t> mask, Dims3 d,
                                               Spacing3 s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> f(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask[i] ? 0.0 : inf;
  std::vector<double> buf;
  std::vector<std::size_t> v;
  std::vector<double> zb;
  const std::size_t nx = d[0], ny = d[1], nz = d[2];
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) edt_1d(f, nx, 1, (z * ny + y) * nx, s[0], buf, v, zb);
  }
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t x = 0; x < nx; ++x) edt_1d(f, ny, nx, z * ny * nx + x, s[1], buf, v, zb);
  }
  if (nz > 1) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) edt_1d(f, nz, nx * ny, y * nx + x, s[2], buf, v, zb);
    }
  }
  return f;
}

double hausdorff_mm(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, Dims3 dims,
                    Spacing3 spacing) {
  check_masks(pred, gt, dims, spacing);
  const auto p = points_of(pred, dims);
  const auto g = points_of(gt, dims);
  return std::sqrt(std::max(directed_sq(p, g, spacing), directed_sq(g, p, spacing)));
}

double hausdorff_mm_fast(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                         Dims3 dims, Spacing3 spacing) {
  check_masks(pred, gt, dims, spacing);
  const auto dt_g = squared_distance_transform(gt, dims, spacing);
  const auto dt_p = squared_distance_transform(pred, dims, spacing);
  double worst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) worst = std::max(worst, dt_g[i]);
    if (gt[i]) worst = std::max(worst, dt_p[i]);
  }
  return std::sqrt(worst);
}

std::vector<ClassMetrics> evaluate_case(const LabelVolume& pred, const LabelVolume& gt,
                                        const LabelSchema& schema) {
  if (pred.dims() != gt.dims()) fail(ErrorCode::kArgument, "evaluate_case: volume dims differ");
  if (pred.nt() != 1) fail(ErrorCode::kArgument, "evaluate_case expects 3D label volumes (nt == 1)");
  validate_labels(pred, schema);
  validate_labels(gt, schema);
  const Dims3 dims{pred.nx(), pred.ny(), pred.nz()};
  const Spacing3 sp{pred.spacing()[0], pred.spacing()[1], pred.spacing()[2]};
  std::vector<ClassMetrics> out;
  std::vector<std::uint8_t> pm(pred.size());
  std::vector<std::uint8_t> gm(gt.size());
  for (const auto& cls : schema.classes()) {
    if (cls.id == LabelSchema::kBackground) continue;
    bool pe = true;
    bool ge = true;
    for (std::size_t i = 0; i < pm.size(); ++i) {
      pm[i] = pred.values()[i] == cls.id;
      gm[i] = gt.values()[i] == cls.id;
      pe = pe && !pm[i];
      ge = ge && !gm[i];
    }
    ClassMetrics m;
    m.class_id = cls.id;
    m.name = cls.name;
    m.counts = confusion(pm, gm);
    m.dice = dice(pm, gm);
    m.jaccard = jaccard(pm, gm);
    m.rates = rates(m.counts);
    if (!pe && !ge) m.hd_mm = hausdorff_mm_fast(pm, gm, dims, sp);
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

MetricStats stats(const std::vector<double>& xs) {
  return {mean_of(xs), population_stdev(xs), xs.size()};
}

}  // namespace

std::vector<ClassSummary> summarize(const std::vector<std::vector<ClassMetrics>>& cases) {
  std::vector<ClassSummary> out;
  if (cases.empty()) return out;
  for (std::size_t k = 0; k < cases.front().size(); ++k) {
    std::vector<double> d, j, tpr, spc, ppv, npv, hd;
    for (const auto& c : cases) {
      if (k >= c.size()) fail(ErrorCode::kArgument, "summarize: cases have different class lists");
      const auto& m = c[k];
      if (!m.dice.both_empty) d.push_back(m.dice.value);
      if (!m.jaccard.both_empty) j.push_back(m.jaccard.value);
      if (m.rates.tpr) tpr.push_back(*m.rates.tpr);
      if (m.rates.spc) spc.push_back(*m.rates.spc);
      if (m.rates.ppv) ppv.push_back(*m.rates.ppv);
      if (m.rates.npv) npv.push_back(*m.rates.npv);
      if (m.hd_mm) hd.push_back(*m.hd_mm);
    }
    const auto& first = cases.front()[k];
    out.push_back({first.class_id, first.name, stats(d), stats(j), stats(tpr), stats(spc), stats(ppv),
                   stats(npv), stats(hd)});
  }
  return out;
}

}  // namespace cmr
