#include "cmr/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "cmr/edges.hpp"
#include "cmr/numeric.hpp"
#include "cmr/postprocess.hpp"

namespace cmr {

void FeatureOptions::validate() const {
  if (!(myo_density > 0.0)) fail(ErrorCode::kArgument, "myocardial density must be positive");
  if (!(canny_sigma > 0.0)) fail(ErrorCode::kArgument, "canny sigma must be positive");
}

double class_volume_ml(const LabelVolume& lbl, std::uint8_t cls) {
  const auto& s = lbl.spacing();
  if (!(s[0] > 0.0 && s[1] > 0.0 && s[2] > 0.0)) {
    fail(ErrorCode::kArgument, "voxel spacing must be positive");
  }
  const auto n = std::count(lbl.values().begin(), lbl.values().end(), cls);
  return static_cast<double>(n) * (s[0] * s[1] * s[2]) / 1000.0;
}

double myo_mass_g(const LabelVolume& ed, double density) {
  if (!(density > 0.0)) fail(ErrorCode::kArgument, "myocardial density must be positive");
  return class_volume_ml(ed, LabelSchema::kMYO) * density;
}

std::optional<double> ejection_fraction(double edv, double esv) {
  if (edv == 0.0) return std::nullopt;
  return (edv - esv) / edv;
}

std::string_view exclusion_name(MwtExclusion r) noexcept {
  switch (r) {
    case MwtExclusion::kNoMyocardium: return "no myocardium";
    case MwtExclusion::kNoCavity: return "no cavity";
    case MwtExclusion::kNoContour: return "no contour";
  }
  return "unknown";
}

std::optional<MwtSlice> mwt_slice(const Image<std::uint8_t>& labels, double sx, double sy,
                                  double sigma, MwtExclusion* why) {
  if (!(sx > 0.0 && sy > 0.0)) fail(ErrorCode::kArgument, "mwt: spacing must be positive");
  const auto reject = [&](MwtExclusion r) -> std::optional<MwtSlice> {
    if (why) *why = r;
    return std::nullopt;
  };
  Mask2 myo(labels.nx(), labels.ny(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) myo.values()[i] = labels.values()[i] == LabelSchema::kMYO;
  if (count_nonzero(myo) == 0) return reject(MwtExclusion::kNoMyocardium);
  const Mask2 epi = fill_holes(myo);
  Mask2 cavity(labels.nx(), labels.ny(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cavity.values()[i] = epi.values()[i] && !myo.values()[i];
  }
  if (count_nonzero(cavity) == 0) return reject(MwtExclusion::kNoCavity);

  const Mask2 outer = region_contour(epi, sigma);
  const Mask2 inner = region_contour(cavity, sigma);
  std::vector<std::pair<double, double>> e_pts;
  for (std::size_t y = 0; y < outer.ny(); ++y) {
    for (std::size_t x = 0; x < outer.nx(); ++x) {
      if (outer(x, y)) e_pts.emplace_back(static_cast<double>(x) * sx, static_cast<double>(y) * sy);
    }
  }
  if (e_pts.empty() || count_nonzero(inner) == 0) return reject(MwtExclusion::kNoContour);

  MwtSlice out;
  for (std::size_t y = 0; y < inner.ny(); ++y) {
    for (std::size_t x = 0; x < inner.nx(); ++x) {
      if (!inner(x, y)) continue;
      const double px = static_cast<double>(x) * sx;
      const double py = static_cast<double>(y) * sy;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [ex, ey] : e_pts) {
        const double dx = px - ex;
        const double dy = py - ey;
        best = std::min(best, dx * dx + dy * dy);
      }
      out.thickness.push_back(std::sqrt(best));
    }
  }
  out.mean = *mean_of(out.thickness);
  out.stdev = *population_stdev(out.thickness);
  return out;
}

MwtResult mwt_phase(const LabelVolume& lbl, double sigma) {
  if (lbl.nt() != 1) fail(ErrorCode::kArgument, "mwt expects a single cardiac phase (nt == 1)");
  MwtResult r;
  for (std::size_t z = 0; z < lbl.nz(); ++z) {
    MwtExclusion why{};
    auto s = mwt_slice(lbl.slice(z, 0), lbl.spacing()[0], lbl.spacing()[1], sigma, &why);
    if (s) {
      s->z = z;
      r.slices.push_back(std::move(*s));
    } else {
      r.excluded.push_back({z, why});
    }
  }
  return r;
}

std::array<std::optional<double>, 4> mwt_profile_features(const MwtResult& mwt) {
  if (mwt.slices.empty()) return {};
  std::vector<double> means;
  std::vector<double> stdevs;
  for (const auto& s : mwt.slices) {
    means.push_back(s.mean);
    stdevs.push_back(s.stdev);
  }
  return {*std::max_element(means.begin(), means.end()), population_stdev(means), mean_of(stdevs),
          population_stdev(stdevs)};
}

const std::array<std::string_view, kFeatureCount>& feature_names() noexcept {
  static constexpr std::array<std::string_view, kFeatureCount> names = {
      "lv_vol_ed_ml",        "rv_vol_ed_ml",        "lv_vol_es_ml",        "rv_vol_es_ml",
      "myo_vol_es_ml",       "myo_mass_ed_g",       "lv_ef",               "rv_ef",
      "ed_lv_rv_ratio",      "es_lv_rv_ratio",      "es_myo_lv_ratio",     "ed_myo_mass_lv_ratio",
      "ed_mwt_max_mean",     "ed_mwt_stdev_mean",   "ed_mwt_mean_stdev",   "ed_mwt_stdev_stdev",
      "es_mwt_max_mean",     "es_mwt_stdev_mean",   "es_mwt_mean_stdev",   "es_mwt_stdev_stdev",
  };
  return names;
}

bool FeatureRecord::complete() const noexcept {
  return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

namespace {

std::optional<double> safe_ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

FeatureRecord extract_features(const PhaseLabels& ph, const FeatureOptions& opts) {
  opts.validate();
  if (ph.ed.dims() != ph.es.dims() || ph.ed.spacing() != ph.es.spacing()) {
    fail(ErrorCode::kArgument, "ED and ES label volumes differ in dims or spacing");
  }
  if (ph.ed.nt() != 1) fail(ErrorCode::kArgument, "phase label volumes must be 3D");
  validate_labels(ph.ed, LabelSchema{});
  validate_labels(ph.es, LabelSchema{});

  const double lv_ed = class_volume_ml(ph.ed, LabelSchema::kLV);
  const double rv_ed = class_volume_ml(ph.ed, LabelSchema::kRV);
  const double lv_es = class_volume_ml(ph.es, LabelSchema::kLV);
  const double rv_es = class_volume_ml(ph.es, LabelSchema::kRV);
  const double myo_es = class_volume_ml(ph.es, LabelSchema::kMYO);
  const double mass_ed = myo_mass_g(ph.ed, opts.myo_density);

  FeatureRecord r;
  auto& v = r.values;
  v[0] = lv_ed;
  v[1] = rv_ed;
  v[2] = lv_es;
  v[3] = rv_es;
  v[4] = myo_es;
  v[5] = mass_ed;
  v[6] = ejection_fraction(lv_ed, lv_es);
  v[7] = ejection_fraction(rv_ed, rv_es);
  v[8] = safe_ratio(lv_ed, rv_ed);
  v[9] = safe_ratio(lv_es, rv_es);
  v[10] = safe_ratio(myo_es, lv_es);
  v[11] = safe_ratio(mass_ed, lv_ed);
  const auto ed = mwt_profile_features(mwt_phase(ph.ed, opts.canny_sigma));
  const auto es = mwt_profile_features(mwt_phase(ph.es, opts.canny_sigma));
  for (std::size_t i = 0; i < 4; ++i) {
    v[12 + i] = ed[i];
    v[kExpertFeatureBegin + i] = es[i];
  }
  return r;
}

namespace {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string features_csv_header() {
  std::string out = "case_id";
  for (const auto name : feature_names()) {
    out += ',';
    out += name;
  }
  out += '\n';
  return out;
}

std::string features_csv_row(const std::string& case_id, const FeatureRecord& r) {
  if (case_id.find_first_of(",\"\r\n") != std::string::npos) {
    fail(ErrorCode::kArgument, "case id must not contain commas, quotes or line breaks");
  }
  std::string out = case_id;
  for (const auto& v : r.values) {
    out += ',';
    if (v) out += format_double(*v);
  }
  out += '\n';
  return out;
}

FeatureTable parse_features_csv(std::string_view text) {
  FeatureTable t;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cells = split_row(line);
    const std::string where = "features csv line " + std::to_string(line_no);
    if (cells.size() != kFeatureCount + 1) {
      fail(ErrorCode::kFormat, where + ": expected " + std::to_string(kFeatureCount + 1) +
                                   " columns, got " + std::to_string(cells.size()));
    }
    if (!header_seen) {
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (cells[i + 1] != feature_names()[i]) {
          fail(ErrorCode::kFormat, where + ": column " + std::to_string(i + 2) + " should be '" +
                                       std::string(feature_names()[i]) + "'");
        }
      }
      header_seen = true;
      continue;
    }
    FeatureRecord r;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const auto cell = cells[i + 1];
      if (cell.empty()) continue;
      double x = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(x)) {
        fail(ErrorCode::kFormat, where + ": bad number in column '" +
                                     std::string(feature_names()[i]) + "'");
      }
      r.values[i] = x;
    }
    t.case_ids.emplace_back(cells[0]);
    t.records.push_back(r);
  }
  if (!header_seen) fail(ErrorCode::kFormat, "features csv has no header");
  return t;
}

}  // namespace cmr
