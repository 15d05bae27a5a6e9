#include "cmr/cmr.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

#include "cmr/config.hpp"
#include "cmr/phantom.hpp"
#include "cmr/pipeline.hpp"
#include "cmr/rng.hpp"
#include "json_util.hpp"

struct cmr_volume {
  cmr::AnyVolume v;
};

struct cmr_config {
  cmr::PipelineConfig c;
};

struct cmr_model {
  cmr::EnsembleModel m;
};

namespace {

using cmr::ErrorCode;
using cmr::fail;
using cmr::detail::json;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

struct NullArgument {
  const char* name;
};

template <typename F>
cmr_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CMR_OK;
  } catch (const cmr::Error& e) {
    g_last_error = e.what();
    return static_cast<cmr_status>(e.code());
  } catch (const NullArgument& e) {
    g_last_error = std::string("argument '") + e.name + "' must not be NULL";
    return CMR_E_NULL;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CMR_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CMR_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CMR_E_INTERNAL;
  }
}

template <typename T>
T* need(T* p, const char* name) {
  if (!p) throw NullArgument{name};
  return p;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** dst, const std::string& s) {
  if (dst) *dst = dup(s);
}

const cmr::ScalarVolume& scalar(const cmr_volume* v, const char* name) {
  const auto* s = std::get_if<cmr::ScalarVolume>(&need(v, name)->v);
  if (!s) fail(ErrorCode::kArgument, std::string(name) + " must be a scalar (FLOAT32) volume");
  return *s;
}

const cmr::LabelVolume& labels(const cmr_volume* v, const char* name) {
  const auto* s = std::get_if<cmr::LabelVolume>(&need(v, name)->v);
  if (!s) fail(ErrorCode::kArgument, std::string(name) + " must be a label (UINT8) volume");
  return *s;
}

const cmr::PipelineConfig& config(const cmr_config* c) {
  static const cmr::PipelineConfig defaults;
  return c ? c->c : defaults;
}

template <typename T>
cmr_volume* wrap(T v) {
  return new cmr_volume{cmr::AnyVolume(std::move(v))};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
  out << s;
  if (!out) fail(ErrorCode::kIo, "short write to " + p.string());
}

// 3D view of a single-phase label volume.
cmr::LabelVolume as_3d(const cmr::LabelVolume& v, const char* name) {
  if (v.nt() != 1) fail(ErrorCode::kArgument, std::string(name) + " must hold a single phase (nt = 1)");
  return cmr::LabelVolume({v.nx(), v.ny(), v.nz(), 1}, v.spacing(),
                          std::vector<std::uint8_t>(v.values().begin(), v.values().end()), 3);
}

std::string percent(long value, long ref) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f%%", 100.0 * static_cast<double>(value - ref) / static_cast<double>(ref));
  return buf;
}

json model_json(const cmr::EnsembleModel& m) {
  json j;
  j["format_version"] = cmr::EnsembleModel::kFormatVersion;
  j["seed"] = m.seed;
  j["use_selection"] = m.use_selection;
  json members = json::array();
  for (const auto& mem : m.members) {
    members.push_back({{"name", std::string(cmr::classifier_name(mem.kind))},
                       {"active", mem.active},
                       {"cv_mean", cmr::detail::opt(mem.cv_mean)},
                       {"cv_stdev", cmr::detail::opt(mem.cv_stdev)}});
  }
  j["members"] = std::move(members);
  j["expert"] = m.expert != nullptr;
  return j;
}

}  // namespace

extern "C" {

const char* cmr_version(void) { return "0.1.0"; }

const char* cmr_status_name(cmr_status s) {
  switch (s) {
    case CMR_OK: return "ok";
    case CMR_E_FORMAT: return "format error";
    case CMR_E_SIZE: return "size error";
    case CMR_E_ARGUMENT: return "argument error";
    case CMR_E_LOCATE: return "locate error";
    case CMR_E_UNDEFINED_DISTANCE: return "undefined distance";
    case CMR_E_TRAINING: return "training error";
    case CMR_E_SELECTION: return "selection error";
    case CMR_E_STRATIFICATION: return "stratification error";
    case CMR_E_BUILD: return "build error";
    case CMR_E_TRACE: return "trace error";
    case CMR_E_IO: return "i/o error";
    case CMR_E_MODEL: return "model error";
    case CMR_E_CONFIG: return "config error";
    case CMR_E_PIPELINE: return "pipeline error";
    case CMR_E_NULL: return "null argument";
    case CMR_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cmr_last_error(void) { return g_last_error.c_str(); }

void cmr_string_free(char* s) { std::free(s); }

// ---- configuration

cmr_status cmr_config_new(cmr_config** out) {
  return guard([&] { *need(out, "out") = new cmr_config{}; });
}

void cmr_config_free(cmr_config* cfg) { delete cfg; }

cmr_status cmr_config_load_file(cmr_config* cfg, const char* path) {
  return guard([&] { cmr::apply_config_file(need(cfg, "cfg")->c, need(path, "path")); });
}

cmr_status cmr_config_apply_env(cmr_config* cfg) {
  return guard([&] { cmr::apply_environment(need(cfg, "cfg")->c, cmr::process_environment()); });
}

cmr_status cmr_config_set(cmr_config* cfg, const char* key, const char* value) {
  return guard([&] { need(cfg, "cfg")->c.set(need(key, "key"), need(value, "value")); });
}

cmr_status cmr_config_get(const cmr_config* cfg, const char* key, char** value) {
  return guard([&] { *need(value, "value") = dup(need(cfg, "cfg")->c.get(need(key, "key"))); });
}

cmr_status cmr_config_dump(const cmr_config* cfg, char** text) {
  return guard([&] { *need(text, "text") = dup(cmr::dump_config(config(cfg))); });
}

cmr_status cmr_config_env_name(const char* key, char** name) {
  return guard([&] {
    cmr::PipelineConfig probe;
    probe.get(need(key, "key"));  // rejects unknown keys
    *need(name, "name") = dup(cmr::env_var_name(key));
  });
}

// ---- volumes

cmr_status cmr_volume_load(const char* path, cmr_volume** out) {
  return guard([&] {
    need(out, "out");
    const fs::path p(need(path, "path"));
    if (cmr::stored_volume_kind(p) == cmr::VolumeKind::kLabel) {
      *out = wrap(cmr::load_label_volume(p));
    } else {
      *out = wrap(cmr::load_scalar_volume(p));
    }
  });
}

cmr_status cmr_volume_save(const cmr_volume* v, const char* path) {
  return guard([&] {
    const fs::path p(need(path, "path"));
    std::visit([&](const auto& vol) { cmr::save_volume(vol, p); }, need(v, "v")->v);
  });
}

void cmr_volume_free(cmr_volume* v) { delete v; }

cmr_status cmr_volume_new_scalar(const size_t dims[4], const double spacing[4], int ndims, const float* data,
                                 cmr_volume** out) {
  return guard([&] {
    need(dims, "dims");
    need(spacing, "spacing");
    need(data, "data");
    const cmr::Dims4 d{dims[0], dims[1], dims[2], dims[3]};
    const std::size_t n = cmr::ScalarVolume::product(d);
    *need(out, "out") = wrap(cmr::ScalarVolume(d, {spacing[0], spacing[1], spacing[2], spacing[3]},
                                               std::vector<float>(data, data + n), ndims));
  });
}

cmr_status cmr_volume_new_label(const size_t dims[4], const double spacing[4], int ndims, const uint8_t* data,
                                cmr_volume** out) {
  return guard([&] {
    need(dims, "dims");
    need(spacing, "spacing");
    need(data, "data");
    const cmr::Dims4 d{dims[0], dims[1], dims[2], dims[3]};
    const std::size_t n = cmr::LabelVolume::product(d);
    cmr::LabelVolume v(d, {spacing[0], spacing[1], spacing[2], spacing[3]}, std::vector<std::uint8_t>(data, data + n),
                       ndims);
    cmr::validate_labels(v, cmr::LabelSchema{});
    *need(out, "out") = wrap(std::move(v));
  });
}

cmr_status cmr_volume_info(const cmr_volume* v, size_t dims[4], double spacing[4], int* ndims, int* is_label) {
  return guard([&] {
    std::visit(
        [&](const auto& vol) {
          for (int i = 0; i < 4; ++i) {
            if (dims) dims[i] = vol.dims()[static_cast<std::size_t>(i)];
            if (spacing) spacing[i] = vol.spacing()[static_cast<std::size_t>(i)];
          }
          if (ndims) *ndims = vol.ndims();
        },
        need(v, "v")->v);
    if (is_label) *is_label = std::holds_alternative<cmr::LabelVolume>(v->v) ? 1 : 0;
  });
}

cmr_status cmr_volume_scalar_data(const cmr_volume* v, const float** data, size_t* count) {
  return guard([&] {
    const auto& s = scalar(v, "v");
    *need(data, "data") = s.values().data();
    if (count) *count = s.size();
  });
}

cmr_status cmr_volume_label_data(const cmr_volume* v, const uint8_t** data, size_t* count) {
  return guard([&] {
    const auto& s = labels(v, "v");
    *need(data, "data") = s.values().data();
    if (count) *count = s.size();
  });
}

// ---- stages

cmr_status cmr_roi_locate(const cmr_volume* cine, const cmr_config* cfg, char** report, cmr_volume** patch) {
  return guard([&] {
    const auto& c = config(cfg);
    c.roi.validate();
    const auto& v = scalar(cine, "cine");
    const cmr::HoughResult h = cmr::locate_roi(v, c.roi);
    cmr::Patch<float> p = cmr::crop_patch(v, h.roi_center, c.roi.patch_size);
    json j;
    j["center"] = {h.roi_center.x, h.roi_center.y};
    j["patch_dims"] = {p.data.dims()[0], p.data.dims()[1], p.data.dims()[2], p.data.dims()[3]};
    json slices = json::array();
    for (const auto& s : h.per_slice) {
      json circles = json::array();
      for (const auto& circle : s.circles) {
        circles.push_back({{"x", circle.center.x}, {"y", circle.center.y}, {"r", circle.radius}, {"score", circle.score}});
      }
      slices.push_back({{"z", s.z}, {"circles", std::move(circles)}});
    }
    j["slices"] = std::move(slices);
    put(report, j.dump(2) + "\n");
    if (patch) *patch = wrap(std::move(p.data));
  });
}

cmr_status cmr_augment(const cmr_volume* image, const cmr_volume* labels_in, const cmr_config* cfg, uint64_t seed,
                       cmr_volume** image_out, cmr_volume** labels_out, char** params) {
  return guard([&] {
    const auto& c = config(cfg);
    c.validate();
    const auto& img = scalar(image, "image");
    const cmr::LabelVolume* lbl = labels_in ? &labels(labels_in, "labels") : nullptr;
    if (lbl && lbl->dims() != img.dims()) fail(ErrorCode::kArgument, "labels and image differ in dims");
    const cmr::AugmentParams p = cmr::sample_params(seed, c.augment_flips, c.augment);
    cmr::ScalarVolume out_img = img;
    std::optional<cmr::LabelVolume> out_lbl;
    if (lbl) out_lbl = *lbl;
    for (std::size_t t = 0; t < img.nt(); ++t) {
      for (std::size_t z = 0; z < img.nz(); ++z) {
        cmr::AugmentParams ps = p;
        ps.noise_seed = cmr::splitmix64(p.noise_seed + t * img.nz() + z);  // fresh noise per slice
        const cmr::Mask2 ls = lbl ? lbl->slice(z, t) : cmr::Mask2{};
        const cmr::Augmented a =
            cmr::apply_augment(img.slice(z, t), lbl ? &ls : nullptr, ps, {img.spacing()[0], img.spacing()[1]});
        out_img.set_slice(z, t, a.image);
        if (out_lbl) out_lbl->set_slice(z, t, *a.labels);
      }
    }
    if (params) {
      json j;
      j["seed"] = seed;
      j["angle_deg"] = p.angle_deg;
      j["shift_mm"] = {p.shift_mm.x, p.shift_mm.y};
      j["zoom"] = p.zoom;
      j["noise_sigma"] = p.noise_sigma;
      json grid = json::array();
      for (const auto& g : p.elastic_grid) grid.push_back({g.x, g.y});
      j["elastic_grid_mm"] = std::move(grid);
      j["flip_h"] = p.flip_h;
      j["flip_v"] = p.flip_v;
      *params = dup(j.dump(2) + "\n");
    }
    if (image_out) *image_out = wrap(std::move(out_img));
    if (labels_out) *labels_out = out_lbl ? wrap(std::move(*out_lbl)) : nullptr;
  });
}

cmr_status cmr_weight_map(const cmr_volume* labels_in, const cmr_config* cfg, cmr_volume** out) {
  return guard([&] {
    const auto& c = config(cfg);
    if (c.weight_dilate < 0) fail(ErrorCode::kConfig, "weights.dilate must be >= 0");
    const auto& lbl = labels(labels_in, "labels");
    const cmr::WeightMap w = cmr::build_weight_map(lbl, c.weight_dilate);
    std::vector<float> data(w.values().begin(), w.values().end());
    *need(out, "out") = wrap(cmr::ScalarVolume(w.dims(), w.spacing(), std::move(data), w.ndims()));
  });
}

cmr_status cmr_loss(const cmr_volume* logits, const cmr_volume* labels_in, const cmr_volume* weights,
                    const cmr_config* cfg, char** report, cmr_volume** grad) {
  return guard([&] {
    const auto& c = config(cfg);
    c.loss.validate();
    const auto& lv = scalar(logits, "logits");
    if (lv.ndims() != 4) fail(ErrorCode::kArgument, "logits must be 4D (nx, ny, nz, classes)");
    const cmr::ClassField f = cmr::class_field_from_volume(lv);
    const cmr::LabelVolume t = as_3d(labels(labels_in, "labels"), "labels");
    std::optional<cmr::WeightMap> w;
    if (weights) {
      const auto& wv = scalar(weights, "weights");
      if (wv.size() != t.size()) fail(ErrorCode::kArgument, "weight map size differs from the labels");
      w = cmr::WeightMap(t.dims(), t.spacing(), std::vector<double>(wv.values().begin(), wv.values().end()), 3);
    }
    const cmr::LossBreakdown b = cmr::total_loss(f, t, w ? &*w : nullptr, c.loss);
    json j;
    j["ce"] = b.ce;
    j["dice_loss"] = b.dice_loss;
    j["l2_term"] = b.l2_term;
    j["total"] = b.total;
    j["clamped"] = b.clamped;
    put(report, j.dump(2) + "\n");
    if (grad) {
      const cmr::ClassField g = cmr::total_loss_grad(f, t, w ? &*w : nullptr, c.loss);
      *grad = wrap(cmr::class_field_to_volume(g, lv.spacing()));
    }
  });
}

cmr_status cmr_postprocess(const cmr_volume* labels_in, const cmr_config* cfg, cmr_volume** out) {
  return guard([&] {
    const auto& c = config(cfg);
    if (c.post.max_rounds < 1) fail(ErrorCode::kConfig, "postproc.max_rounds must be >= 1");
    *need(out, "out") = wrap(cmr::postprocess_labels(labels(labels_in, "labels"), c.post));
  });
}

cmr_status cmr_evaluate(const cmr_volume* pred, const cmr_volume* gt, char** report) {
  return guard([&] {
    const auto p = as_3d(labels(pred, "pred"), "pred");
    const auto g = as_3d(labels(gt, "gt"), "gt");
    json j;
    j["classes"] = cmr::detail::metrics_json(cmr::evaluate_case(p, g));
    *need(report, "report") = dup(j.dump(2) + "\n");
  });
}

namespace {

std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

json stats_json(const cmr::MetricStats& s) { return {{"mean", cmr::detail::opt(s.mean)}, {"std", cmr::detail::opt(s.stdev)}, {"n", s.n}}; }

}  // namespace

cmr_status cmr_evaluate_batch(const cmr_volume* const* preds, const cmr_volume* const* gts,
                              const char* const* case_ids, size_t n, char** csv, char** report) {
  return guard([&] {
    if (n == 0) fail(ErrorCode::kArgument, "evaluate_batch: no cases");
    need(preds, "preds");
    need(gts, "gts");
    need(case_ids, "case_ids");
    std::vector<std::vector<cmr::ClassMetrics>> all;
    std::string text = "case_id,class,dice,jaccard,tpr,spc,ppv,npv,hd_mm\n";
    json cases = json::array();
    for (size_t i = 0; i < n; ++i) {
      const std::string id = need(case_ids[i], "case_id");
      auto ms = cmr::evaluate_case(as_3d(labels(preds[i], "pred"), "pred"), as_3d(labels(gts[i], "gt"), "gt"));
      for (const auto& m : ms) {
        text += id + "," + m.name + "," + csv_cell(m.dice.value) + "," + csv_cell(m.jaccard.value) + "," +
                csv_cell(m.rates.tpr) + "," + csv_cell(m.rates.spc) + "," + csv_cell(m.rates.ppv) + "," +
                csv_cell(m.rates.npv) + "," + csv_cell(m.hd_mm) + "\n";
      }
      cases.push_back({{"case_id", id}, {"classes", cmr::detail::metrics_json(ms)}});
      all.push_back(std::move(ms));
    }
    const auto summary = cmr::summarize(all);
    json sj = json::array();
    for (const bool mean : {true, false}) {
      for (const auto& s : summary) {
        const auto pick = [&](const cmr::MetricStats& st) { return csv_cell(mean ? st.mean : st.stdev); };
        text += std::string(mean ? "mean" : "std") + "," + s.name + "," + pick(s.dice) + "," + pick(s.jaccard) + "," +
                pick(s.tpr) + "," + pick(s.spc) + "," + pick(s.ppv) + "," + pick(s.npv) + "," + pick(s.hd_mm) + "\n";
      }
    }
    for (const auto& s : summary) {
      sj.push_back({{"class", s.name},           {"dice", stats_json(s.dice)}, {"jaccard", stats_json(s.jaccard)},
                    {"tpr", stats_json(s.tpr)},  {"spc", stats_json(s.spc)},   {"ppv", stats_json(s.ppv)},
                    {"npv", stats_json(s.npv)},  {"hd_mm", stats_json(s.hd_mm)}});
    }
    if (csv) *csv = dup(text);
    if (report) *report = dup(json{{"cases", cases}, {"summary", sj}}.dump(2) + "\n");
  });
}

cmr_status cmr_features(const cmr_volume* ed, const cmr_volume* es, const cmr_config* cfg, const char* case_id,
                        char** csv) {
  return guard([&] {
    const cmr::PhaseLabels ph{as_3d(labels(ed, "ed"), "ed"), as_3d(labels(es, "es"), "es"), std::nullopt,
                              std::nullopt};
    const cmr::FeatureRecord r = cmr::extract_features(ph, config(cfg).features);
    *need(csv, "csv") = dup(cmr::features_csv_header() + cmr::features_csv_row(need(case_id, "case_id"), r));
  });
}

// ---- diagnosis

cmr_status cmr_model_train(const char* features_csv, const char* labels_csv, const cmr_config* cfg, cmr_model** out,
                           char** summary) {
  return guard([&] {
    const auto& c = config(cfg);
    c.validate();
    const cmr::FeatureTable table = cmr::parse_features_csv(need(features_csv, "features_csv"));
    const auto lbls = cmr::parse_labels_csv(need(labels_csv, "labels_csv"));
    std::vector<cmr::Disease> y;
    for (const auto& id : table.case_ids) {
      const auto it = std::find_if(lbls.begin(), lbls.end(), [&](const auto& p) { return p.first == id; });
      if (it == lbls.end()) fail(ErrorCode::kArgument, "no label for case '" + id + "'");
      y.push_back(it->second);
    }
    auto m = std::make_unique<cmr_model>(cmr_model{cmr::train_ensemble(table.records, y, c.ensemble)});
    put(summary, model_json(m->m).dump(2) + "\n");
    *need(out, "out") = m.release();
  });
}

cmr_status cmr_model_load(const char* path, cmr_model** out) {
  return guard([&] {
    need(out, "out");
    *out = new cmr_model{cmr::load_model(need(path, "path"))};
  });
}

cmr_status cmr_model_save(const cmr_model* m, const char* path) {
  return guard([&] { cmr::save_model(need(m, "m")->m, need(path, "path")); });
}

void cmr_model_free(cmr_model* m) { delete m; }

cmr_status cmr_model_info(const cmr_model* m, char** report) {
  return guard([&] { *need(report, "report") = dup(model_json(need(m, "m")->m).dump(2) + "\n"); });
}

cmr_status cmr_predict(const cmr_model* m, const char* features_csv, char** report) {
  return guard([&] {
    const auto& model = need(m, "m")->m;
    const cmr::FeatureTable table = cmr::parse_features_csv(need(features_csv, "features_csv"));
    json cases = json::array();
    for (std::size_t i = 0; i < table.records.size(); ++i) {
      json j = cmr::detail::prediction_json(cmr::predict_two_stage(model, table.records[i]));
      json row;
      row["case_id"] = table.case_ids[i];
      for (auto& [k, v] : j.items()) row[k] = v;
      cases.push_back(std::move(row));
    }
    json out;
    out["predictions"] = std::move(cases);
    *need(report, "report") = dup(out.dump(2) + "\n");
  });
}

// ---- network description

cmr_status cmr_netinfo(const cmr_config* cfg, cmr_net_format format, char** text) {
  return guard([&] {
    need(text, "text");
    const cmr::NetConfig& nc = config(cfg).net;
    std::string out;
    switch (format) {
      case CMR_NET_SUMMARY: {
        const cmr::NetGraph g = cmr::build_graph(nc);
        out = "variant " + std::string(cmr::variant_name(nc.variant)) + ", k = " + std::to_string(nc.k) +
              ", F = " + std::to_string(nc.f) + ", P = " + std::to_string(nc.pools) + ", input " +
              cmr::to_string(nc.input) + ", output " + cmr::to_string(g.output().out) + "\n";
        for (const auto& b : cmr::param_breakdown(g)) {
          out += "  " + b.block + std::string(b.block.size() < 14 ? 14 - b.block.size() : 1, ' ') +
                 std::to_string(b.params) + "\n";
        }
        out += "total parameters: " + std::to_string(cmr::param_count(g)) + "\n";
        break;
      }
      case CMR_NET_JSON:
        out = cmr::to_json(cmr::build_graph(nc));
        break;
      case CMR_NET_DOT:
        out = cmr::to_dot(cmr::build_graph(nc));
        break;
      case CMR_NET_SWEEP: {
        const auto pts = cmr::growth_sweep(nc, {2, 4, 6, 8, 10, 12, 14, 16});
        out = "k\tF\tparams\n";
        for (const auto& p : pts) {
          out += std::to_string(p.k) + "\t" + std::to_string(p.f) + "\t" + std::to_string(p.params) + "\n";
        }
        const auto fit = cmr::fit_quadratic(pts);
        char line[160];
        std::snprintf(line, sizeof(line), "fit: params = %.4f k^2 %+.4f k %+.4f, R^2 = %.9f\n", fit.a, fit.b, fit.c,
                      fit.r2);
        out += line;
        break;
      }
      case CMR_NET_CALIBRATION: {
        out = "k\tpublished\tconfigured\tdeviation\tpreset\tdeviation\n";
        for (const auto& r : cmr::calibration_report(nc)) {
          out += std::to_string(r.k) + "\t" + std::to_string(r.reference) + "\t" + std::to_string(r.configured) +
                 "\t" + percent(r.configured, r.reference) + "\t" + std::to_string(r.preset) + "\t" +
                 percent(r.preset, r.reference) + "\n";
        }
        out += "configured: current net.* settings with F scaled by k\n";
        out += "preset: dense blocks 2,3,4 / 5 / 4,3,2, F = 3k, first-layer split 1:1:1\n";
        break;
      }
      default:
        fail(ErrorCode::kArgument, "unknown netinfo format " + std::to_string(static_cast<int>(format)));
    }
    *text = dup(out);
  });
}

cmr_status cmr_net_trace(const cmr_config* cfg, const char* input_shape, char** text) {
  return guard([&] {
    const cmr::NetGraph g = cmr::build_graph(config(cfg).net);
    const auto shapes = cmr::shape_trace(g, cmr::parse_shape(need(input_shape, "input_shape")));
    std::string out;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      out += std::to_string(i) + "\t" + g.nodes[i].name + "\t" + std::string(cmr::node_kind_name(g.nodes[i].kind)) +
             "\t" + cmr::to_string(shapes[i]) + "\n";
    }
    *need(text, "text") = dup(out);
  });
}

// ---- pipeline

cmr_status cmr_pipeline_run(const cmr_pipeline_inputs* in, const cmr_config* cfg, char** report) {
  std::string stage_error;
  const cmr_status s = guard([&] {
    need(in, "in");
    cmr::PipelineInputs pi;
    if (in->case_id) pi.case_id = in->case_id;
    pi.cine = need(in->cine, "in->cine");
    pi.out_dir = need(in->out_dir, "in->out_dir");
    const auto opt_path = [](const char* p) { return p ? std::optional<fs::path>(p) : std::nullopt; };
    pi.ed = opt_path(in->ed);
    pi.es = opt_path(in->es);
    pi.gt_ed = opt_path(in->gt_ed);
    pi.gt_es = opt_path(in->gt_es);
    const cmr::PipelineResult r = cmr::execute_pipeline(pi, config(cfg));
    put(report, r.report);
    if (!r.ok) stage_error = "stage '" + r.failed_stage + "': " + r.error;
  });
  if (s == CMR_OK && !stage_error.empty()) {
    g_last_error = stage_error;
    return CMR_E_PIPELINE;
  }
  return s;
}

cmr_status cmr_pipeline_batch(const char* manifest_path, const char* out_root, const cmr_config* cfg, char** summary) {
  std::string failed;
  const cmr_status s = guard([&] {
    const fs::path mp(need(manifest_path, "manifest_path"));
    const fs::path root(need(out_root, "out_root"));
    const auto cases = cmr::parse_manifest(read_text(mp), mp.parent_path(), root);
    const auto results = cmr::run_batch(cases, config(cfg));
    json j;
    j["schema"] = 1;
    json list = json::array();
    std::size_t n_failed = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& r = results[i];
      json e;
      e["case_id"] = cases[i].case_id;
      e["status"] = r.ok ? "ok" : "failed";
      e["report"] = (fs::path(cases[i].case_id) / "report.json").string();
      if (!r.ok) {
        e["failed_stage"] = r.failed_stage;
        e["error"] = r.error;
        ++n_failed;
        if (failed.empty()) failed = cases[i].case_id + ": stage '" + r.failed_stage + "': " + r.error;
      }
      list.push_back(std::move(e));
    }
    j["cases"] = std::move(list);
    j["failed"] = n_failed;
    fs::create_directories(root);
    write_text(root / "summary.json", j.dump(2) + "\n");
    put(summary, j.dump(2) + "\n");
  });
  if (s == CMR_OK && !failed.empty()) {
    g_last_error = failed;
    return CMR_E_PIPELINE;
  }
  return s;
}

// ---- synthetic data

cmr_status cmr_phantom(const char* kind, const char* out_dir, uint64_t seed, size_t count, char** manifest) {
  return guard([&] {
    const std::string k(need(kind, "kind"));
    const fs::path dir(need(out_dir, "out_dir"));
    fs::create_directories(dir);
    json j;
    j["kind"] = k;
    j["seed"] = seed;
    if (k == "case") {
      const cmr::PhantomCase pc = cmr::phantom_case(cmr::default_heart(), 30, seed);
      cmr::save_volume(pc.cine, dir / "cine.mha");
      cmr::save_volume(pc.ed, dir / "ed.mha");
      cmr::save_volume(pc.es, dir / "es.mha");
      write_text(dir / "manifest.csv", "case_id,cine,ed,es,gt_ed,gt_es\nphantom,cine.mha,ed.mha,es.mha,ed.mha,es.mha\n");
      j["files"] = {"cine.mha", "ed.mha", "es.mha", "manifest.csv"};
      j["lv_center"] = {pc.lv_center.x, pc.lv_center.y};
      j["ed_frame"] = pc.ed_frame;
      j["es_frame"] = pc.es_frame;
    } else if (k == "disk") {
      cmr::Rng g(seed);
      const cmr::DiskCineOptions o;
      const long margin = static_cast<long>(o.r_max) + 16;
      const cmr::PixelCoord c{margin + static_cast<long>(cmr::uniform_index(g, o.nx - 2 * margin)),
                              margin + static_cast<long>(cmr::uniform_index(g, o.ny - 2 * margin))};
      cmr::save_volume(cmr::pulsating_disk_cine(c, seed, o), dir / "cine.mha");
      json truth;
      truth["center"] = {c.x, c.y};
      write_text(dir / "truth.json", truth.dump(2) + "\n");
      j["files"] = {"cine.mha", "truth.json"};
      j["center"] = {c.x, c.y};
    } else if (k == "cohort") {
      if (count < 10) fail(ErrorCode::kArgument, "cohort needs at least 10 cases");
      std::string features = cmr::features_csv_header();
      std::string lbls = "case_id,label\n";
      const auto cohort = cmr::mwt_cohort(count, seed);
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "c%04zu", i + 1);
        features += cmr::features_csv_row(id, cmr::extract_features(cmr::heart_phases(cohort[i].spec)));
        lbls += std::string(id) + "," + std::string(cmr::disease_name(cohort[i].label)) + "\n";
      }
      write_text(dir / "features.csv", features);
      write_text(dir / "labels.csv", lbls);
      j["files"] = {"features.csv", "labels.csv"};
      j["count"] = count;
    } else {
      fail(ErrorCode::kArgument, "unknown phantom kind '" + k + "' (expected case, disk or cohort)");
    }
    put(manifest, j.dump(2) + "\n");
  });
}

}  // extern "C"
