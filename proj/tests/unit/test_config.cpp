#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cmr/config.hpp"

using namespace cmr;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("set and get every key") {
  PipelineConfig c;
  for (const auto& [key, value] : c.entries()) {
    PipelineConfig d;
    d.set(key, value);
    CHECK(d.get(key) == value);
  }
  CHECK(c.entries().size() == config_keys().size());
}

TEST_CASE("typed values") {
  PipelineConfig c;
  c.set("roi.patch_size", "64x96");
  CHECK(c.roi.patch_size == PatchSize{64, 96});
  c.set("loss.gamma", "0.25");
  CHECK(c.loss.gamma == 0.25);
  c.set("postproc.fill", "false");
  CHECK(!c.post.fill);
  c.set("net.variant", "B");
  CHECK(c.net.variant == NetVariant::kB);
  c.set("net.down_layers", "2,3,4");
  CHECK(c.net.down_layers == std::vector<int>{2, 3, 4});
  c.set("net.input", "1x64x64");
  CHECK(c.net.input == Shape3{1, 64, 64});
  c.set("classifier.model", "m.bin");
  CHECK(c.model_path == "m.bin");
  c.set("classifier.selection", "true");
  CHECK(c.ensemble.use_selection);

  CHECK(code_of([&] { c.set("roi.nope", "1"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { c.set("roi.top_p", "five"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { c.set("roi.patch_size", "64"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { c.set("postproc.fill", "maybe"); }) == ErrorCode::kConfig);
}

TEST_CASE("config text") {
  PipelineConfig c;
  apply_config_text(c, "# comment\n\nroi.top_p = 7\n  loss.lambda=2 # trailing\n");
  CHECK(c.roi.top_p == 7);
  CHECK(c.loss.lambda == 2.0);
  try {
    apply_config_text(c, "roi.top_p = 3\nbogus\n", "x.cfg");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
  CHECK(code_of([&] { apply_config_file(c, "/nonexistent/cmrkit.cfg"); }) != ErrorCode{});
}

TEST_CASE("precedence: defaults, file, environment, assignment") {
  const auto path = std::filesystem::temp_directory_path() / "cmrkit_unit_precedence.cfg";
  std::ofstream(path) << "roi.top_p = 4\nroi.radius_min = 12\n";
  PipelineConfig c;
  apply_config_file(c, path);
  CHECK(c.roi.top_p == 4);
  apply_environment(c, {{"CMR_ROI_TOP_P", "3"}, {"PATH", "/bin"}, {"HOME", "/root"}});
  CHECK(c.roi.top_p == 3);
  CHECK(c.roi.radius_min == 12);
  apply_assignment(c, "roi.top_p=7");
  CHECK(c.roi.top_p == 7);
  CHECK(code_of([&] { apply_environment(c, {{"CMR_NOT_A_KEY", "1"}}); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { apply_assignment(c, "roi.top_p"); }) == ErrorCode::kConfig);
  CHECK(env_var_name("roi.patch_size") == "CMR_ROI_PATCH_SIZE");
}

TEST_CASE("validation and dump") {
  PipelineConfig c;
  c.validate();
  c.loss.epsilon = 0.0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  PipelineConfig d;
  PipelineConfig e;
  apply_config_text(e, dump_config(d));
  CHECK(e.entries() == d.entries());
}
