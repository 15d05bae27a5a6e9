#include "cmr/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "cmr/metrics.hpp"
#include "json_util.hpp"

namespace cmr {

namespace {

namespace fs = std::filesystem;
using detail::json;
using detail::metrics_json;
using detail::opt;
using detail::prediction_json;

json dims_json(const Dims4& d) { return json::array({d[0], d[1], d[2], d[3]}); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "short write to " + p.string());
}

bool same_spacing(const Spacing4& a, const Spacing4& b) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a[i] - b[i]) > 1e-6 * std::max(a[i], b[i])) return false;
  }
  return true;
}

LabelVolume argmax_labels(const ScalarVolume& probs, const LabelSchema& schema) {
  if (probs.ndims() != 4 || probs.nt() != schema.size()) {
    fail(ErrorCode::kArgument, "probability volume needs a last axis of " + std::to_string(schema.size()) +
                                   " classes, got dims " + dims_json(probs.dims()).dump());
  }
  const ClassField f = class_field_from_volume(probs);
  LabelVolume out({probs.nx(), probs.ny(), probs.nz(), 1}, probs.spacing(), 3);
  for (std::size_t v = 0; v < f.voxels(); ++v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < f.classes(); ++c) {
      if (f(c, v) > f(best, v)) best = c;  // ties keep the lower class
    }
    out.values()[v] = schema.classes()[best].id;
  }
  return out;
}

// Loads a segmentation and places it on the cine grid.
LabelVolume ingest(const fs::path& path, const ScalarVolume& cine, PixelCoord center, PatchSize patch,
                   json& info) {
  const LabelSchema schema;
  LabelVolume lbl;
  if (stored_volume_kind(path) == VolumeKind::kLabel) {
    lbl = load_label_volume(path, schema);
    info["source"] = "labels";
  } else {
    lbl = argmax_labels(load_scalar_volume(path), schema);
    info["source"] = "probabilities";
  }
  if (lbl.nt() != 1) fail(ErrorCode::kArgument, path.string() + ": segmentation must be a single 3D phase");
  if (!same_spacing(lbl.spacing(), cine.spacing())) {
    fail(ErrorCode::kArgument, path.string() + ": voxel spacing differs from the cine");
  }
  if (lbl.nx() == cine.nx() && lbl.ny() == cine.ny() && lbl.nz() == cine.nz()) {
    info["grid"] = "image";
    return LabelVolume({cine.nx(), cine.ny(), cine.nz(), 1}, cine.spacing(),
                       std::vector<std::uint8_t>(lbl.values().begin(), lbl.values().end()), 3);
  }
  if (lbl.nx() == patch.w && lbl.ny() == patch.h && lbl.nz() == cine.nz()) {
    info["grid"] = "patch";
    LabelVolume full({cine.nx(), cine.ny(), cine.nz(), 1}, cine.spacing(), 3);
    embed_patch(Patch<std::uint8_t>{center, patch, std::move(lbl)}, full);
    return full;
  }
  fail(ErrorCode::kArgument, path.string() + ": grid " + dims_json(lbl.dims()).dump() +
                                 " matches neither the cine grid nor the ROI patch");
}

class Run {
 public:
  Run(const PipelineInputs& in, const PipelineConfig& cfg) : in_(in), cfg_(cfg) {
    report_["schema"] = 1;
    report_["case_id"] = in.case_id;
    report_["status"] = "running";
    json inputs;
    inputs["cine"] = in.cine.string();
    const auto path_or_null = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
    inputs["ed"] = path_or_null(in.ed);
    inputs["es"] = path_or_null(in.es);
    inputs["gt_ed"] = path_or_null(in.gt_ed);
    inputs["gt_es"] = path_or_null(in.gt_es);
    inputs["model"] = cfg.model_path.empty() ? json(nullptr) : json(cfg.model_path);
    report_["inputs"] = std::move(inputs);
    json c = json::object();
    for (const auto& [k, v] : cfg.entries()) c[k] = v;
    report_["config"] = std::move(c);
    artifacts_ = json::object();
    audit_ = json::array();
  }

  PipelineResult execute() {
    PipelineResult res;
    res.report_path = in_.out_dir / "report.json";
    try {
      fs::create_directories(in_.out_dir);
    } catch (const fs::filesystem_error& e) {
      res.failed_stage = "setup";
      res.error = e.what();
      return res;
    }
    const bool ok = stage("config", [&] { cfg_.validate(); }) && stage("roi", [&] { roi(); }) &&
                    stage("segmentation", [&] { segmentation(); }) && stage("postproc", [&] { postproc(); }) &&
                    stage("metrics", [&] { metrics(); }) && stage("features", [&] { features(); }) &&
                    stage("predict", [&] { predict(); });
    report_["status"] = ok ? "ok" : "failed";
    if (!ok) {
      report_["failed_stage"] = failed_stage_;
      report_["error"] = error_;
    }
    report_["artifacts"] = artifacts_;
    report_["audit"] = audit_;
    res.report = report_.dump(2) + "\n";
    try {
      write_text(res.report_path, res.report);
    } catch (const Error& e) {
      if (ok) {
        failed_stage_ = "report";
        error_ = e.what();
      }
      res.ok = false;
      res.failed_stage = failed_stage_;
      res.error = error_;
      return res;
    }
    res.ok = ok;
    res.failed_stage = failed_stage_;
    res.error = error_;
    return res;
  }

 private:
  bool stage(const char* name, const std::function<void()>& body) {
    note_ = "";
    status_ = "ok";
    try {
      body();
    } catch (const std::exception& e) {
      failed_stage_ = name;
      error_ = e.what();
      audit_.push_back({{"stage", name}, {"status", "failed"}, {"detail", error_}});
      return false;
    }
    audit_.push_back({{"stage", name}, {"status", status_}, {"detail", note_}});
    return true;
  }

  void skip(std::string why) {
    status_ = "skipped";
    note_ = std::move(why);
  }

  template <typename V>
  void save(const std::string& key, const std::string& file, const V& v) {
    save_volume(v, in_.out_dir / file);
    artifacts_[key] = file;
  }

  void roi() {
    cine_ = load_scalar_volume(in_.cine);
    if (cine_.ndims() != 4 || cine_.nt() < 2) fail(ErrorCode::kArgument, "cine must be 4D with at least two frames");
    const HoughResult h = locate_roi(cine_, cfg_.roi);
    center_ = h.roi_center;
    const Patch<float> p = crop_patch(cine_, center_, cfg_.roi.patch_size);
    save("roi_patch", "roi_patch.mha", p.data);
    json r;
    r["center"] = {center_.x, center_.y};
    r["patch_size"] = {cfg_.roi.patch_size.w, cfg_.roi.patch_size.h};
    r["patch_dims"] = dims_json(p.data.dims());
    json circles = json::array();
    for (const auto& s : h.per_slice) circles.push_back(s.circles.size());
    r["circles_per_slice"] = std::move(circles);
    report_["roi"] = std::move(r);
    note_ = "centre (" + std::to_string(center_.x) + ", " + std::to_string(center_.y) + ")";
  }

  void segmentation() {
    json seg = json::object();
    const auto one = [&](const std::optional<fs::path>& p, std::optional<LabelVolume>& dst, const char* phase) {
      if (!p) {
        seg[phase] = nullptr;
        return;
      }
      json info;
      dst = ingest(*p, cine_, center_, cfg_.roi.patch_size, info);
      save(std::string(phase) + "_labels", std::string(phase) + "_labels.mha", *dst);
      seg[phase] = std::move(info);
    };
    one(in_.ed, ed_, "ed");
    one(in_.es, es_, "es");
    report_["segmentation"] = std::move(seg);
    if (!ed_ && !es_) skip("no segmentation given");
  }

  void postproc() {
    json pp;
    pp["enabled"] = cfg_.postproc;
    if (!cfg_.postproc) {
      report_["postproc"] = std::move(pp);
      skip("disabled by config");
      return;
    }
    const auto one = [&](std::optional<LabelVolume>& v, const char* phase) {
      if (!v) return;
      LabelVolume out = postprocess_labels(*v, cfg_.post);
      std::size_t changed = 0;
      for (std::size_t i = 0; i < out.size(); ++i) changed += out.values()[i] != v->values()[i];
      pp[std::string(phase) + "_changed_voxels"] = changed;
      v = std::move(out);
      save(std::string(phase) + "_post", std::string(phase) + "_post.mha", *v);
    };
    one(ed_, "ed");
    one(es_, "es");
    report_["postproc"] = std::move(pp);
    if (!ed_ && !es_) skip("nothing to post-process");
  }

  void metrics() {
    json m = json::object();
    const auto one = [&](const std::optional<fs::path>& gt_path, const std::optional<LabelVolume>& pred,
                         const char* phase) {
      if (!gt_path) return;
      if (!pred) {
        fail(ErrorCode::kArgument, std::string("ground truth for ") + phase + " given without a segmentation");
      }
      const LabelVolume gt = load_label_volume(*gt_path);
      if (gt.nx() != pred->nx() || gt.ny() != pred->ny() || gt.nz() != pred->nz() || gt.nt() != 1) {
        fail(ErrorCode::kArgument, gt_path->string() + ": ground truth grid differs from the segmentation");
      }
      const LabelVolume gt3({gt.nx(), gt.ny(), gt.nz(), 1}, pred->spacing(),
                            std::vector<std::uint8_t>(gt.values().begin(), gt.values().end()), 3);
      m[phase] = metrics_json(evaluate_case(*pred, gt3));
    };
    one(in_.gt_ed, ed_, "ed");
    one(in_.gt_es, es_, "es");
    if (m.empty()) {
      skip("no ground truth given");
    } else {
      report_["metrics"] = std::move(m);
    }
  }

  void features() {
    if (!ed_ || !es_) {
      fail(ErrorCode::kArgument, std::string(!ed_ ? "ED" : "ES") +
                                     " segmentation missing; features need both the ED and the ES volume");
    }
    record_ = extract_features(PhaseLabels{*ed_, *es_, std::nullopt, std::nullopt}, cfg_.features);
    write_text(in_.out_dir / "features.csv", features_csv_header() + features_csv_row(in_.case_id, *record_));
    artifacts_["features"] = "features.csv";
    json f;
    for (std::size_t i = 0; i < kFeatureCount; ++i) f[std::string(feature_names()[i])] = opt(record_->values[i]);
    report_["features"] = std::move(f);
    if (!record_->complete()) note_ = "some features are undefined";
  }

  void predict() {
    if (cfg_.model_path.empty()) {
      skip("no model configured (classifier.model)");
      return;
    }
    const EnsembleModel model = load_model(cfg_.model_path);
    const Prediction p = predict_two_stage(model, *record_);
    json j = prediction_json(p);
    report_["prediction"] = std::move(j);
    note_ = std::string(disease_name(p.label));
  }

  const PipelineInputs& in_;
  const PipelineConfig& cfg_;
  json report_;
  json artifacts_;
  json audit_;
  std::string note_;
  std::string status_;
  std::string failed_stage_;
  std::string error_;

  ScalarVolume cine_;
  PixelCoord center_;
  std::optional<LabelVolume> ed_;
  std::optional<LabelVolume> es_;
  std::optional<FeatureRecord> record_;
};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

}  // namespace

PipelineResult execute_pipeline(const PipelineInputs& in, const PipelineConfig& cfg) {
  return Run(in, cfg).execute();
}

PipelineResult run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg) {
  PipelineResult r = execute_pipeline(in, cfg);
  if (!r.ok) fail(ErrorCode::kPipeline, "stage '" + r.failed_stage + "': " + r.error);
  return r;
}

std::vector<PipelineInputs> parse_manifest(std::string_view text, const fs::path& base_dir,
                                           const fs::path& out_root) {
  constexpr std::string_view kHeader = "case_id,cine,ed,es,gt_ed,gt_es";
  std::vector<PipelineInputs> out;
  std::size_t line_no = 0;
  bool header = true;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kHeader) fail(ErrorCode::kFormat, "manifest header must be '" + std::string(kHeader) + "'");
      header = false;
      continue;
    }
    if (line.find('"') != std::string_view::npos) {
      fail(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": quoted fields are not supported");
    }
    const auto cells = split_commas(line);
    if (cells.size() != 6) fail(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": expected 6 cells");
    if (cells[0].empty() || cells[1].empty()) {
      fail(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": case_id and cine are required");
    }
    const std::string id(cells[0]);
    if (id.find('/') != std::string::npos || id == "." || id == "..") {
      fail(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": case_id must be a plain name");
    }
    for (const auto& prev : out) {
      if (prev.case_id == id) fail(ErrorCode::kFormat, "manifest: duplicate case_id '" + id + "'");
    }
    const auto resolve = [&](std::string_view s) -> std::optional<fs::path> {
      if (s.empty()) return std::nullopt;
      const fs::path p(s);
      return p.is_absolute() ? p : base_dir / p;
    };
    PipelineInputs in;
    in.case_id = id;
    in.cine = *resolve(cells[1]);
    in.ed = resolve(cells[2]);
    in.es = resolve(cells[3]);
    in.gt_ed = resolve(cells[4]);
    in.gt_es = resolve(cells[5]);
    in.out_dir = out_root / id;
    out.push_back(std::move(in));
  }
  if (header) fail(ErrorCode::kFormat, "manifest is empty");
  return out;
}

std::vector<PipelineResult> run_batch(const std::vector<PipelineInputs>& cases, const PipelineConfig& cfg) {
  std::vector<PipelineResult> results(cases.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) results[i] = Run(cases[i], cfg).execute();
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.threads, 1)), cases.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  return results;
}

}  // namespace cmr
