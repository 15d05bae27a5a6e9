#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cmr/phantom.hpp"
#include "cmr/pipeline.hpp"

using namespace cmr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "cmrkit_unit_pipeline" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineInputs write_case(const fs::path& dir) {
  const auto pc = phantom_case(default_heart(), 20, 3);
  save_volume(pc.cine, dir / "cine.mha");
  save_volume(pc.ed, dir / "ed.mha");
  save_volume(pc.es, dir / "es.mha");
  PipelineInputs in;
  in.case_id = "p1";
  in.cine = dir / "cine.mha";
  in.ed = dir / "ed.mha";
  in.es = dir / "es.mha";
  in.gt_ed = dir / "ed.mha";
  in.gt_es = dir / "es.mha";
  in.out_dir = dir / "out";
  return in;
}

}  // namespace

TEST_CASE("phantom case end to end") {
  const auto dir = fresh_dir("e2e");
  const auto in = write_case(dir);
  const auto r = run_pipeline(in, PipelineConfig{});
  CHECK(r.ok);
  const auto j = nlohmann::json::parse(r.report);
  CHECK(j["schema"] == 1);
  CHECK(j["status"] == "ok");
  for (const char* phase : {"ed", "es"}) {
    for (const auto& m : j["metrics"][phase]) {
      CHECK(m["dice"] == 1.0);
      CHECK(m["hd_mm"] == 0.0);
    }
  }
  CHECK((!j.contains("prediction") || j["prediction"].is_null()));  // no model configured
  CHECK(fs::exists(in.out_dir / "features.csv"));
  CHECK(slurp(r.report_path) == r.report);

  const auto again = run_pipeline(in, PipelineConfig{});
  CHECK(again.report == r.report);
}

TEST_CASE("missing ES aborts at the features stage") {
  const auto dir = fresh_dir("no_es");
  auto in = write_case(dir);
  in.es.reset();
  in.gt_es.reset();
  const auto r = execute_pipeline(in, PipelineConfig{});
  CHECK(!r.ok);
  CHECK(r.failed_stage == "features");
  CHECK(r.error.find("ES segmentation missing") != std::string::npos);
  CHECK(fs::exists(in.out_dir / "roi_patch.mha"));
  CHECK(fs::exists(in.out_dir / "report.json"));
  try {
    run_pipeline(in, PipelineConfig{});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPipeline);
    CHECK(std::string(e.what()).find("features") != std::string::npos);
  }
}

TEST_CASE("patch size reaches the ROI stage") {
  const auto dir = fresh_dir("patch");
  const auto in = write_case(dir);
  PipelineConfig c;
  c.set("roi.patch_size", "64x96");
  const auto j = nlohmann::json::parse(run_pipeline(in, c).report);
  CHECK(j["roi"]["patch_dims"][0] == 64);
  CHECK(j["roi"]["patch_dims"][1] == 96);
  CHECK(load_scalar_volume(in.out_dir / "roi_patch.mha").nx() == 64);
}

TEST_CASE("manifests and batches") {
  const auto dir = fresh_dir("batch");
  write_case(dir);
  const std::string text =
      "case_id,cine,ed,es,gt_ed,gt_es\n"
      "a,cine.mha,ed.mha,es.mha,,\n"
      "b,cine.mha,ed.mha,,,\n";
  const auto cases = parse_manifest(text, dir, dir / "runs");
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].cine == dir / "cine.mha");
  CHECK(cases[1].out_dir == dir / "runs" / "b");
  CHECK(!cases[1].es);
  PipelineConfig c;
  c.threads = 2;
  const auto rs = run_batch(cases, c);
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].ok);
  CHECK(!rs[1].ok);

  CHECK_THROWS_AS(parse_manifest("id,cine\n", dir, dir), Error);
  CHECK_THROWS_AS(parse_manifest("case_id,cine,ed,es,gt_ed,gt_es\na,x,,,,\na,y,,,,\n", dir, dir), Error);
  CHECK_THROWS_AS(parse_manifest("case_id,cine,ed,es,gt_ed,gt_es\na/b,x,,,,\n", dir, dir), Error);
}

TEST_CASE("probability input") {
  const auto dir = fresh_dir("probs");
  auto in = write_case(dir);
  const auto ed = load_label_volume(*in.ed);
  ScalarVolume probs({ed.nx(), ed.ny(), ed.nz(), 4}, ed.spacing());
  for (std::size_t z = 0; z < ed.nz(); ++z) {
    for (std::size_t y = 0; y < ed.ny(); ++y) {
      for (std::size_t x = 0; x < ed.nx(); ++x) probs(x, y, z, ed(x, y, z)) = 0.7f;
    }
  }
  save_volume(probs, dir / "ed_probs.mha");
  in.ed = dir / "ed_probs.mha";
  const auto j = nlohmann::json::parse(run_pipeline(in, PipelineConfig{}).report);
  CHECK(j["segmentation"]["ed"]["source"] == "probabilities");
  for (const auto& m : j["metrics"]["ed"]) CHECK(m["dice"] == 1.0);
}
