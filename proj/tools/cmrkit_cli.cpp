// Command-line front end. Talks to the library only through cmr/cmr.h.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmr/cmr.h"

namespace {

struct Failure {
  int code;
  std::string message;
};

void check(cmr_status s) {
  if (s != CMR_OK) throw Failure{static_cast<int>(s), std::string(cmr_status_name(s)) + ": " + cmr_last_error()};
}

struct StringDeleter {
  void operator()(char* s) const { cmr_string_free(s); }
};
struct VolumeDeleter {
  void operator()(cmr_volume* v) const { cmr_volume_free(v); }
};
struct ConfigDeleter {
  void operator()(cmr_config* c) const { cmr_config_free(c); }
};
struct ModelDeleter {
  void operator()(cmr_model* m) const { cmr_model_free(m); }
};

using Text = std::unique_ptr<char, StringDeleter>;
using Volume = std::unique_ptr<cmr_volume, VolumeDeleter>;
using Config = std::unique_ptr<cmr_config, ConfigDeleter>;
using Model = std::unique_ptr<cmr_model, ModelDeleter>;

Volume load(const std::string& path) {
  cmr_volume* v = nullptr;
  check(cmr_volume_load(path.c_str(), &v));
  return Volume(v);
}

void save(const Volume& v, const std::string& path) {
  check(cmr_volume_save(v.get(), path.c_str()));
  std::cerr << "wrote " << path << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{CMR_E_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "-" writes to stdout; anything else is a file.
void emit(const char* text, const std::string& out) {
  if (out == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Failure{CMR_E_IO, "cannot write " + out};
  std::cerr << "wrote " << out << "\n";
}

struct Globals {
  std::string config_file;
  std::vector<std::string> assignments;
};

Config make_config(const Globals& g) {
  cmr_config* raw = nullptr;
  check(cmr_config_new(&raw));
  Config cfg(raw);
  if (!g.config_file.empty()) check(cmr_config_load_file(cfg.get(), g.config_file.c_str()));
  check(cmr_config_apply_env(cfg.get()));
  for (const auto& a : g.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw Failure{CMR_E_CONFIG, "--set expects key=value, got '" + a + "'"};
    check(cmr_config_set(cfg.get(), a.substr(0, eq).c_str(), a.substr(eq + 1).c_str()));
  }
  return cfg;
}

const char* opt_c(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

namespace fs = std::filesystem;

bool is_volume(const fs::path& p) { return p.extension() == ".mha" || p.extension() == ".mhd"; }

// A file gives one case named after its stem; a folder gives every volume in
// it, sorted by name.
std::vector<fs::path> volume_list(const std::string& arg) {
  if (!fs::is_directory(arg)) return {arg};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(arg)) {
    if (e.is_regular_file() && is_volume(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Failure{CMR_E_IO, "no .mha/.mhd volumes in " + arg};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardiac cine MR analysis toolkit: ROI, losses, post-processing, metrics, features, diagnosis"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(cmr_version()));
  Globals g;
  app.add_option("--config", g.config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.assignments, "override a config key (key=value), repeatable");

  std::function<void()> run;

  // roi
  std::string cine, out, patch;
  auto* roi = app.add_subcommand("roi", "locate the heart on a cine volume");
  roi->add_option("--cine", cine, "4D cine volume")->required();
  roi->add_option("--out", out, "JSON report ('-' for stdout)")->required();
  roi->add_option("--patch", patch, "write the cropped cine patch here");
  roi->callback([&] {
    run = [&] {
      const Config cfg = make_config(g);
      const Volume v = load(cine);
      char* report = nullptr;
      cmr_volume* p = nullptr;
      check(cmr_roi_locate(v.get(), cfg.get(), &report, patch.empty() ? nullptr : &p));
      const Text t(report);
      const Volume pv(p);
      if (pv) save(pv, patch);
      emit(t.get(), out);
    };
  });

  // augment
  std::string image, labels, out_image, out_labels, params_out, out_dir;
  std::uint64_t seed = 0;
  std::size_t aug_count = 0;
  auto* aug = app.add_subcommand("augment", "apply random rigid + elastic augmentations");
  aug->add_option("--input,--image", image, "scalar volume")->required();
  aug->add_option("--labels", labels, "label volume transformed alongside");
  aug->add_option("--seed", seed, "parameter seed (pair i uses seed + i)");
  aug->add_option("--count", aug_count, "write this many pairs to --out-dir");
  aug->add_option("--out-dir", out_dir, "folder for aug_NNN.mha, aug_NNN_labels.mha and aug_NNN.json");
  aug->add_option("--out-image", out_image, "augmented image (single pair)");
  aug->add_option("--out-labels", out_labels, "augmented labels (single pair, needs --labels)");
  aug->add_option("--params", params_out, "JSON of the drawn parameters ('-' for stdout)");
  aug->callback([&] {
    run = [&] {
      const bool batch = aug_count > 0 || !out_dir.empty();
      if (batch && (out_dir.empty() || !out_image.empty() || !out_labels.empty())) {
        throw Failure{CMR_E_ARGUMENT, "--count goes with --out-dir instead of --out-image/--out-labels"};
      }
      if (!batch && out_image.empty()) throw Failure{CMR_E_ARGUMENT, "--out-image or --out-dir is required"};
      if (!batch && !out_labels.empty() && labels.empty()) {
        throw Failure{CMR_E_ARGUMENT, "--out-labels needs --labels"};
      }
      const Config cfg = make_config(g);
      const Volume img = load(image);
      const Volume lbl = labels.empty() ? Volume() : load(labels);
      const bool want_labels = lbl && (batch || !out_labels.empty());
      const std::size_t n = batch ? std::max<std::size_t>(aug_count, 1) : 1;
      if (batch) fs::create_directories(out_dir);
      for (std::size_t i = 0; i < n; ++i) {
        cmr_volume* oi = nullptr;
        cmr_volume* ol = nullptr;
        char* params = nullptr;
        check(cmr_augment(img.get(), lbl.get(), cfg.get(), seed + i, &oi, want_labels ? &ol : nullptr, &params));
        const Volume vi(oi);
        const Volume vl(ol);
        const Text pt(params);
        if (batch) {
          char stem[32];
          std::snprintf(stem, sizeof stem, "aug_%03zu", i);
          const fs::path base = fs::path(out_dir) / stem;
          save(vi, base.string() + ".mha");
          if (vl) save(vl, base.string() + "_labels.mha");
          emit(pt.get(), base.string() + ".json");
        } else {
          save(vi, out_image);
          if (vl) save(vl, out_labels);
          if (!params_out.empty()) emit(pt.get(), params_out);
        }
      }
    };
  });

  // weights
  auto* wts = app.add_subcommand("weights", "spatial weight map of a label volume");
  wts->add_option("--labels", labels, "label volume")->required();
  wts->add_option("--out", out, "FLOAT32 weight volume")->required();
  wts->callback([&] {
    run = [&] {
      const Config cfg = make_config(g);
      const Volume l = load(labels);
      cmr_volume* w = nullptr;
      check(cmr_weight_map(l.get(), cfg.get(), &w));
      save(Volume(w), out);
    };
  });

  // loss
  std::string logits, weights, grad;
  auto* loss = app.add_subcommand("loss", "weighted cross-entropy + Dice loss of a logit volume");
  loss->add_option("--logits", logits, "FLOAT32 (nx, ny, nz, classes)")->required();
  loss->add_option("--labels", labels, "label volume")->required();
  loss->add_option("--weights", weights, "weight map (default: unit weights)");
  loss->add_option("--grad", grad, "write d loss / d logits here");
  loss->add_option("--out", out, "JSON loss breakdown ('-' for stdout)")->required();
  loss->callback([&] {
    run = [&] {
      const Config cfg = make_config(g);
      const Volume lg = load(logits);
      const Volume lb = load(labels);
      const Volume w = weights.empty() ? Volume() : load(weights);
      char* report = nullptr;
      cmr_volume* gv = nullptr;
      check(cmr_loss(lg.get(), lb.get(), w.get(), cfg.get(), &report, grad.empty() ? nullptr : &gv));
      const Text t(report);
      const Volume gvol(gv);
      if (gvol) save(gvol, grad);
      emit(t.get(), out);
    };
  });

  // postproc
  bool skip_3d = false, skip_2d = false, skip_fill = false;
  auto* post = app.add_subcommand("postproc", "largest components and hole filling");
  post->add_option("--input,--labels", labels, "label volume")->required();
  post->add_option("--output,--out", out, "cleaned label volume")->required();
  post->add_flag("--skip-3d", skip_3d, "keep every 3D component");
  post->add_flag("--skip-2d", skip_2d, "keep every in-slice component");
  post->add_flag("--skip-fill", skip_fill, "leave holes unfilled");
  post->callback([&] {
    run = [&] {
      if (skip_3d) g.assignments.push_back("postproc.largest_3d=false");
      if (skip_2d) g.assignments.push_back("postproc.largest_2d=false");
      if (skip_fill) g.assignments.push_back("postproc.fill=false");
      const Config cfg = make_config(g);
      const Volume l = load(labels);
      cmr_volume* o = nullptr;
      check(cmr_postprocess(l.get(), cfg.get(), &o));
      save(Volume(o), out);
    };
  });

  // eval
  std::string pred, gt, csv_out;
  auto* ev = app.add_subcommand("eval", "Dice, Jaccard, rates and Hausdorff distance per class");
  ev->add_option("--pred", pred, "predicted labels, or a folder of them")->required();
  ev->add_option("--gt", gt, "ground-truth labels, or a folder matched by file name")->required();
  ev->add_option("--csv", csv_out, "per case and class rows plus mean/std rows ('-' for stdout)");
  ev->add_option("--out", out, "JSON ('-' for stdout)");
  ev->callback([&] {
    run = [&] {
      if (csv_out.empty() && out.empty()) throw Failure{CMR_E_ARGUMENT, "--csv or --out is required"};
      make_config(g);  // validates --config / environment even though eval has no settings
      const auto preds = volume_list(pred);
      const bool folder = fs::is_directory(gt);
      if (fs::is_directory(pred) != folder) throw Failure{CMR_E_ARGUMENT, "--pred and --gt must both be files or folders"};
      std::vector<Volume> pv, gv;
      std::vector<std::string> ids;
      for (const auto& p : preds) {
        const fs::path g_path = folder ? fs::path(gt) / p.filename() : fs::path(gt);
        if (!fs::exists(g_path)) throw Failure{CMR_E_IO, "no ground truth for " + p.string() + " at " + g_path.string()};
        pv.push_back(load(p.string()));
        gv.push_back(load(g_path.string()));
        ids.push_back(p.stem().string());
      }
      std::vector<const cmr_volume*> pp, gp;
      std::vector<const char*> ip;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        pp.push_back(pv[i].get());
        gp.push_back(gv[i].get());
        ip.push_back(ids[i].c_str());
      }
      char* csv = nullptr;
      char* report = nullptr;
      check(cmr_evaluate_batch(pp.data(), gp.data(), ip.data(), ids.size(), &csv, &report));
      const Text c(csv);
      const Text r(report);
      if (!csv_out.empty()) emit(c.get(), csv_out);
      if (!out.empty()) emit(r.get(), out);
    };
  });

  // features
  std::string ed, es, case_id = "case";
  auto* feat = app.add_subcommand("features", "volumetric and wall-thickness features of one case");
  feat->add_option("--ed", ed, "ED labels")->required();
  feat->add_option("--es", es, "ES labels")->required();
  feat->add_option("--case-id", case_id, "row identifier");
  feat->add_option("--out", out, "CSV ('-' for stdout)")->required();
  feat->callback([&] {
    run = [&] {
      const Config cfg = make_config(g);
      const Volume a = load(ed);
      const Volume b = load(es);
      char* csv = nullptr;
      check(cmr_features(a.get(), b.get(), cfg.get(), case_id.c_str(), &csv));
      emit(Text(csv).get(), out);
    };
  });

  // train-clf
  std::string features_csv, labels_csv, model_path, summary;
  auto* tr = app.add_subcommand("train-clf", "train the two-stage diagnosis ensemble");
  tr->add_option("--features", features_csv, "feature CSV")->required();
  tr->add_option("--labels", labels_csv, "case_id,label CSV")->required();
  tr->add_option("--model", model_path, "output model file")->required();
  tr->add_option("--summary", summary, "JSON with member CV scores ('-' for stdout)");
  std::optional<std::uint64_t> clf_seed;
  tr->add_option("--seed", clf_seed, "sets classifier.seed");
  tr->callback([&] {
    run = [&] {
      if (clf_seed) g.assignments.push_back("classifier.seed=" + std::to_string(*clf_seed));
      const Config cfg = make_config(g);
      const std::string f = read_file(features_csv);
      const std::string l = read_file(labels_csv);
      cmr_model* m = nullptr;
      char* s = nullptr;
      check(cmr_model_train(f.c_str(), l.c_str(), cfg.get(), &m, &s));
      const Model model(m);
      const Text st(s);
      check(cmr_model_save(model.get(), model_path.c_str()));
      std::cerr << "wrote " << model_path << "\n";
      if (!summary.empty()) emit(st.get(), summary);
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "diagnose cases from a feature CSV");
  pr->add_option("--model", model_path, "model file (default: classifier.model)");
  pr->add_option("--features", features_csv, "feature CSV")->required();
  pr->add_option("--out", out, "JSON ('-' for stdout)")->required();
  pr->callback([&] {
    run = [&] {
      const Config cfg = make_config(g);
      std::string path = model_path;
      if (path.empty()) {
        char* v = nullptr;
        check(cmr_config_get(cfg.get(), "classifier.model", &v));
        path = Text(v).get();
      }
      if (path.empty()) throw Failure{CMR_E_ARGUMENT, "no model: pass --model or set classifier.model"};
      cmr_model* m = nullptr;
      check(cmr_model_load(path.c_str(), &m));
      const Model model(m);
      const std::string f = read_file(features_csv);
      char* report = nullptr;
      check(cmr_predict(model.get(), f.c_str(), &report));
      emit(Text(report).get(), out);
    };
  });

  // netinfo
  std::string format = "summary", trace;
  auto* net = app.add_subcommand("netinfo", "parameter counts and shapes of the segmentation network");
  net->add_option("--format", format, "summary, json, dot, sweep or calibration")
      ->check(CLI::IsMember({"summary", "json", "dot", "sweep", "calibration"}));
  net->add_option("--trace", trace, "per-node shapes for input CxHxW (replaces --format)");
  net->add_option("--out", out, "output ('-' for stdout)")->required();
  std::string net_variant, net_input;
  std::optional<int> net_k, net_f, net_p;
  net->add_option("--variant", net_variant, "A, B or C (sets net.variant)");
  net->add_option("--k", net_k, "growth rate (sets net.k)");
  net->add_option("--f", net_f, "stem feature maps (sets net.f)");
  net->add_option("--p", net_p, "pooling steps (sets net.pools)");
  net->add_option("--input", net_input, "CxHxW (sets net.input)");
  net->callback([&] {
    run = [&] {
      if (!net_variant.empty()) g.assignments.push_back("net.variant=" + net_variant);
      if (net_k) g.assignments.push_back("net.k=" + std::to_string(*net_k));
      if (net_f) g.assignments.push_back("net.f=" + std::to_string(*net_f));
      if (net_p) g.assignments.push_back("net.pools=" + std::to_string(*net_p));
      if (!net_input.empty()) g.assignments.push_back("net.input=" + net_input);
      const Config cfg = make_config(g);
      // A bare --p keeps the block depth and resizes the layer lists to match.
      for (const char* key : {"net.down_layers", "net.up_layers"}) {
        if (!net_p) break;
        char* v = nullptr;
        check(cmr_config_get(cfg.get(), key, &v));
        const std::string list = Text(v).get();
        if (static_cast<int>(std::count(list.begin(), list.end(), ',')) + 1 == *net_p) continue;
        const std::string first = list.substr(0, list.find(','));
        std::string resized = first;
        for (int i = 1; i < *net_p; ++i) resized += "," + first;
        check(cmr_config_set(cfg.get(), key, resized.c_str()));
      }
      char* text = nullptr;
      if (!trace.empty()) {
        check(cmr_net_trace(cfg.get(), trace.c_str(), &text));
      } else {
        const cmr_net_format f = format == "json"          ? CMR_NET_JSON
                                 : format == "dot"         ? CMR_NET_DOT
                                 : format == "sweep"       ? CMR_NET_SWEEP
                                 : format == "calibration" ? CMR_NET_CALIBRATION
                                                           : CMR_NET_SUMMARY;
        check(cmr_netinfo(cfg.get(), f, &text));
      }
      emit(Text(text).get(), out);
    };
  });

  // pipeline
  std::string gt_ed, gt_es, manifest;
  auto* pipe = app.add_subcommand("pipeline", "roi, segmentation hand-off, postproc, metrics, features, diagnosis");
  pipe->add_option("--cine", cine, "4D cine volume");
  pipe->add_option("--ed", ed, "ED labels or class probabilities");
  pipe->add_option("--es", es, "ES labels or class probabilities");
  pipe->add_option("--gt-ed", gt_ed, "ED ground truth");
  pipe->add_option("--gt-es", gt_es, "ES ground truth");
  pipe->add_option("--case-id", case_id, "case identifier");
  pipe->add_option("--model", model_path, "diagnosis model (sets classifier.model)");
  pipe->add_option("--manifest", manifest, "CSV of cases for batch mode (replaces the per-case options)");
  pipe->add_option("--out-dir", out_dir, "artifact folder (batch: one subfolder per case)")->required();
  pipe->add_option("--out", out, "copy of the report or batch summary ('-' for stdout)");
  pipe->callback([&] {
    run = [&] {
      if (!model_path.empty()) g.assignments.push_back("classifier.model=" + model_path);
      const Config cfg = make_config(g);
      char* report = nullptr;
      cmr_status s;
      if (!manifest.empty()) {
        if (!cine.empty()) throw Failure{CMR_E_ARGUMENT, "--manifest and --cine are exclusive"};
        s = cmr_pipeline_batch(manifest.c_str(), out_dir.c_str(), cfg.get(), &report);
      } else {
        if (cine.empty()) throw Failure{CMR_E_ARGUMENT, "--cine or --manifest is required"};
        const cmr_pipeline_inputs in{case_id.c_str(), cine.c_str(), opt_c(ed),     opt_c(es),
                                     opt_c(gt_ed),    opt_c(gt_es), out_dir.c_str()};
        s = cmr_pipeline_run(&in, cfg.get(), &report);
      }
      const Text t(report);
      if (t && !out.empty()) emit(t.get(), out);
      check(s);
      std::cerr << "pipeline finished, artifacts in " << out_dir << "\n";
    };
  });

  // phantom
  std::string kind = "case";
  std::size_t count = 200;
  auto* ph = app.add_subcommand("phantom", "write synthetic test data");
  ph->add_option("--kind", kind, "case, disk or cohort")->check(CLI::IsMember({"case", "disk", "cohort"}));
  ph->add_option("--out-dir", out_dir, "output folder")->required();
  ph->add_option("--seed", seed, "random seed");
  ph->add_option("--count", count, "cohort size");
  ph->add_option("--out", out, "JSON listing of the written files ('-' for stdout)");
  ph->callback([&] {
    run = [&] {
      make_config(g);
      char* m = nullptr;
      check(cmr_phantom(kind.c_str(), out_dir.c_str(), seed, count, &m));
      const Text t(m);
      if (!out.empty()) emit(t.get(), out);
      std::cerr << "wrote " << kind << " phantom to " << out_dir << "\n";
    };
  });

  // config
  auto* cf = app.add_subcommand("config", "print the effective configuration");
  cf->add_option("--out", out, "output ('-' for stdout)")->required();
  cf->callback([&] {
    run = [&] {
      const Config cfg = make_config(g);
      char* text = nullptr;
      check(cmr_config_dump(cfg.get(), &text));
      emit(Text(text).get(), out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    run();
  } catch (const Failure& f) {
    std::cerr << "cmrkit " << name << ": " << f.message << "\n";
    return f.code == 0 ? 1 : f.code;
  } catch (const std::exception& e) {
    std::cerr << "cmrkit " << name << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
