#include "cmr/diagnosis.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <limits>

#include "bytes.hpp"
#include "cmr/error.hpp"

namespace cmr {

using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::array<std::string_view, kDiseaseCount> kDiseaseNames = {"NOR", "MINF", "DCM", "HCM",
                                                                         "ARV"};
constexpr std::string_view kMagic = "CMRKITMD";
constexpr int kExpertMinf = 0;
constexpr int kExpertDcm = 1;

constexpr std::array<ClassifierKind, 4> kStage1 = {ClassifierKind::kSVM, ClassifierKind::kMLP,
                                                   ClassifierKind::kGNB, ClassifierKind::kRF};

RawRow to_row(const FeatureRecord& r) { return RawRow(r.values.begin(), r.values.end()); }

RawRow expert_row(const FeatureRecord& r) {
  return RawRow(r.values.begin() + kExpertFeatureBegin, r.values.begin() + kExpertFeatureBegin + 4);
}

}  // namespace

std::string_view disease_name(Disease d) noexcept {
  const auto i = static_cast<std::size_t>(d);
  return i < kDiseaseNames.size() ? kDiseaseNames[i] : "?";
}

Disease parse_disease(std::string_view name) {
  for (std::size_t i = 0; i < kDiseaseNames.size(); ++i) {
    if (kDiseaseNames[i] == name) return static_cast<Disease>(i);
  }
  fail(ErrorCode::kArgument, "unknown disease label '" + std::string(name) + "'");
}

EnsembleModel train_ensemble(const std::vector<FeatureRecord>& records, const std::vector<Disease>& labels,
                             const EnsembleConfig& cfg) {
  if (records.size() != labels.size()) {
    fail(ErrorCode::kArgument, "feature records and labels differ in count");
  }
  if (records.empty()) fail(ErrorCode::kArgument, "no training cases");
  if (cfg.use_selection && !cfg.compute_cv) {
    fail(ErrorCode::kArgument, "selection rule needs cross-validation scores");
  }
  std::vector<RawRow> rows;
  std::vector<int> y;
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.push_back(to_row(records[i]));
    y.push_back(static_cast<int>(labels[i]));
  }

  EnsembleModel m;
  m.seed = cfg.seed;
  m.use_selection = cfg.use_selection;
  m.scaler = Scaler::fit(rows);
  const Dataset full{m.scaler.apply(rows), y};

  std::vector<NamedScore> scores;
  for (std::size_t i = 0; i < kStage1.size(); ++i) {
    ClassifierSpec spec = cfg.base;
    spec.kind = kStage1[i];
    spec.seed = cfg.seed + i;
    EnsembleMember mem;
    mem.kind = spec.kind;
    if (cfg.compute_cv) {
      const auto cv = cross_validate(rows, y, spec, cfg.cv_folds, cfg.seed);
      mem.cv_mean = cv.mean;
      mem.cv_stdev = cv.stdev;
      scores.push_back({std::string(classifier_name(spec.kind)), cv.mean});
    }
    mem.model = train_classifier(spec, full);
    m.members.push_back(std::move(mem));
  }
  if (cfg.use_selection) {
    const auto keep = select_classifiers(scores, cfg.selection_threshold);
    for (auto& mem : m.members) {
      mem.active = std::find(keep.begin(), keep.end(), classifier_name(mem.kind)) != keep.end();
    }
  }

  std::vector<RawRow> erows;
  std::vector<int> ey;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (labels[i] == Disease::kMINF || labels[i] == Disease::kDCM) {
      erows.push_back(expert_row(records[i]));
      ey.push_back(labels[i] == Disease::kMINF ? kExpertMinf : kExpertDcm);
    }
  }
  const bool both = std::count(ey.begin(), ey.end(), kExpertMinf) > 0 &&
                    std::count(ey.begin(), ey.end(), kExpertDcm) > 0;
  if (both) {
    m.expert_scaler = Scaler::fit(erows);
    ClassifierSpec spec = cfg.base;
    spec.kind = ClassifierKind::kMLP;
    spec.seed = cfg.seed + 100;
    m.expert = train_classifier(spec, Dataset{m.expert_scaler.apply(erows), ey});
  }
  return m;
}

Disease majority_vote(const std::vector<Disease>& votes, const std::vector<std::optional<double>>& cv,
                      bool* tie) {
  if (votes.empty()) fail(ErrorCode::kArgument, "majority vote over zero voters");
  if (cv.size() != votes.size()) fail(ErrorCode::kArgument, "one CV score per voter expected");
  std::array<int, kDiseaseCount> count{};
  for (auto v : votes) ++count[static_cast<std::size_t>(v)];
  const int top = *std::max_element(count.begin(), count.end());
  const auto tied = std::count(count.begin(), count.end(), top);
  if (tie) *tie = tied > 1;
  std::size_t best = votes.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (count[static_cast<std::size_t>(votes[i])] != top) continue;
    const double s = cv[i].value_or(-std::numeric_limits<double>::infinity());
    if (best == votes.size() || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return votes[best];
}

Prediction predict_two_stage(const EnsembleModel& m, const FeatureRecord& f) {
  const auto x = m.scaler.apply(to_row(f));
  Prediction p;
  std::vector<Disease> votes;
  std::vector<std::optional<double>> cv;
  for (const auto& mem : m.members) {
    if (!mem.active) continue;
    const int lbl = mem.model->predict(x);
    if (lbl < 0 || lbl >= kDiseaseCount) fail(ErrorCode::kModel, "classifier produced an unknown class");
    const auto d = static_cast<Disease>(lbl);
    p.votes.push_back({std::string(classifier_name(mem.kind)), d});
    votes.push_back(d);
    cv.push_back(mem.cv_mean);
  }
  p.stage1 = majority_vote(votes, cv, &p.tie);
  p.label = p.stage1;
  if ((p.stage1 == Disease::kMINF || p.stage1 == Disease::kDCM) && m.expert) {
    const int e = m.expert->predict(m.expert_scaler.apply(expert_row(f)));
    p.stage2_fired = true;
    p.expert_label = e == kExpertMinf ? Disease::kMINF : Disease::kDCM;
    p.label = *p.expert_label;
  }
  return p;
}

namespace {

void write_scaler(const Scaler& s, ByteWriter& w) {
  w.f64s(s.median);
  w.f64s(s.mean);
  w.f64s(s.stdev);
}

Scaler read_scaler(ByteReader& r) {
  Scaler s;
  s.median = r.f64s();
  s.mean = r.f64s();
  s.stdev = r.f64s();
  if (s.median.size() != s.mean.size() || s.stdev.size() != s.mean.size()) {
    fail(ErrorCode::kModel, "model file: inconsistent scaler");
  }
  return s;
}

}  // namespace

std::string serialize_model(const EnsembleModel& m) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(EnsembleModel::kFormatVersion);
  w.u32(static_cast<std::uint32_t>(kFeatureCount));
  for (auto n : feature_names()) w.str(n);
  w.u32(static_cast<std::uint32_t>(kDiseaseCount));
  for (auto n : kDiseaseNames) w.str(n);
  w.u64(m.seed);
  w.u8(m.use_selection ? 1 : 0);
  write_scaler(m.scaler, w);
  w.u32(static_cast<std::uint32_t>(m.members.size()));
  for (const auto& mem : m.members) {
    w.u8(mem.active ? 1 : 0);
    w.u8(mem.cv_mean ? 1 : 0);
    w.f64(mem.cv_mean.value_or(0.0));
    w.f64(mem.cv_stdev.value_or(0.0));
    write_classifier(*mem.model, w);
  }
  w.u8(m.expert ? 1 : 0);
  if (m.expert) {
    write_scaler(m.expert_scaler, w);
    write_classifier(*m.expert, w);
  }
  return w.take();
}

EnsembleModel deserialize_model(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic) {
    fail(ErrorCode::kModel, "not a cmrkit model file (bad magic)");
  }
  const auto version = r.u32();
  if (version != EnsembleModel::kFormatVersion) {
    fail(ErrorCode::kModel, "unsupported model format version " + std::to_string(version));
  }
  const auto nf = r.u32();
  if (nf != kFeatureCount) fail(ErrorCode::kModel, "model was trained on a different feature set");
  for (std::size_t i = 0; i < nf; ++i) {
    if (r.str() != feature_names()[i]) fail(ErrorCode::kModel, "model feature names do not match");
  }
  const auto nd = r.u32();
  if (nd != static_cast<std::uint32_t>(kDiseaseCount)) fail(ErrorCode::kModel, "model label set differs");
  for (std::size_t i = 0; i < nd; ++i) {
    if (r.str() != kDiseaseNames[i]) fail(ErrorCode::kModel, "model label names do not match");
  }
  EnsembleModel m;
  m.seed = r.u64();
  m.use_selection = r.u8() != 0;
  m.scaler = read_scaler(r);
  if (m.scaler.dims() != kFeatureCount) fail(ErrorCode::kModel, "model scaler has wrong width");
  const auto nm = r.u32();
  if (nm == 0 || nm > 16) fail(ErrorCode::kModel, "model has an implausible member count");
  for (std::uint32_t i = 0; i < nm; ++i) {
    EnsembleMember mem;
    mem.active = r.u8() != 0;
    const bool has_cv = r.u8() != 0;
    const double mean = r.f64();
    const double sd = r.f64();
    if (has_cv) {
      mem.cv_mean = mean;
      mem.cv_stdev = sd;
    }
    mem.model = read_classifier(r);
    mem.kind = mem.model->kind();
    if (mem.model->dims() != kFeatureCount) fail(ErrorCode::kModel, "member expects wrong feature count");
    m.members.push_back(std::move(mem));
  }
  if (std::none_of(m.members.begin(), m.members.end(), [](const auto& x) { return x.active; })) {
    fail(ErrorCode::kModel, "model has no active stage-1 member");
  }
  if (r.u8() != 0) {
    m.expert_scaler = read_scaler(r);
    m.expert = read_classifier(r);
    if (m.expert->dims() != 4 || m.expert_scaler.dims() != 4) {
      fail(ErrorCode::kModel, "expert must consume exactly four features");
    }
  }
  if (!r.done()) fail(ErrorCode::kModel, "trailing bytes after model data");
  return m;
}

void save_model(const EnsembleModel& m, const std::filesystem::path& path) {
  const auto bytes = serialize_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

EnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model file '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

std::vector<std::pair<std::string, Disease>> parse_labels_csv(std::string_view text) {
  std::vector<std::pair<std::string, Disease>> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  bool header = true;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      fail(ErrorCode::kFormat, "labels csv line " + std::to_string(line_no) + ": expected two columns");
    }
    if (header) {
      header = false;
      continue;
    }
    out.emplace_back(std::string(line.substr(0, comma)), parse_disease(line.substr(comma + 1)));
  }
  return out;
}

}  // namespace cmr
