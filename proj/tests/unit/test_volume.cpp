#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "cmr/rng.hpp"
#include "cmr/volume.hpp"

using namespace cmr;

namespace {

std::filesystem::path temp_file(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "cmrkit_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("2x2x1x1 float payload keeps x-fastest order") {
  const std::string bytes = [] {
    std::string h = "NDims = 4\nDimSize = 2 2 1 1\nElementSpacing = 1 1 1 1\nElementType = FLOAT32\n"
                    "ElementDataFile = LOCAL\n\n";
    for (float f : {0.0f, 1.0f, 2.0f, 3.0f}) {
      char b[4];
      std::memcpy(b, &f, 4);
      h.append(b, 4);
    }
    return h;
  }();
  const auto v = std::get<ScalarVolume>(decode_volume(bytes, VolumeKind::kScalar));
  CHECK(v(0, 0, 0) == 0.0f);
  CHECK(v(1, 0, 0) == 1.0f);
  CHECK(v(0, 1, 0) == 2.0f);
  CHECK(v(1, 1, 0) == 3.0f);
  CHECK(encode_volume(v) == bytes);
}

TEST_CASE("payload shortfall reports expected and actual bytes") {
  std::string h = "NDims = 4\nDimSize = 4 3 2 5\nElementSpacing = 1 1 1 1\nElementType = FLOAT32\n"
                  "ElementDataFile = LOCAL\n\n";
  h.append(400, '\0');
  try {
    decode_volume(h, VolumeKind::kScalar);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSize);
    CHECK(std::string(e.what()).find("480") != std::string::npos);
    CHECK(std::string(e.what()).find("400") != std::string::npos);
  }
}

TEST_CASE("malformed header names the key") {
  const std::string h = "NDims = 4\nDimSize = 2 2 x 1\nElementSpacing = 1 1 1 1\nElementType = FLOAT32\n"
                        "ElementDataFile = LOCAL\n\n";
  try {
    decode_volume(h, VolumeKind::kScalar);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
    CHECK(std::string(e.what()).find("DimSize") != std::string::npos);
  }
  CHECK(code_of([] { decode_volume("NDims = 5\n", VolumeKind::kScalar); }) == ErrorCode::kFormat);
  CHECK(code_of([] {
          decode_volume("NDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\nElementType = INT16\n"
                        "ElementDataFile = LOCAL\n\n",
                        VolumeKind::kScalar);
        }) == ErrorCode::kFormat);
}

TEST_CASE("save then load is bitwise equal") {
  Rng g(5);
  ScalarVolume v({16, 16, 8, 20}, {1.25, 1.25, 8, 30});
  for (auto& x : v.values()) x = static_cast<float>(uniform(g, -1e3, 1e3));
  const auto path = temp_file("roundtrip.mha");
  save_volume(v, path);
  const ScalarVolume back = load_scalar_volume(path);
  CHECK(back == v);
  CHECK(std::memcmp(back.values().data(), v.values().data(), v.size() * 4) == 0);

  LabelVolume l({7, 5, 3, 1}, {1.5, 1.5, 10, 1}, 3);
  for (auto& x : l.values()) x = static_cast<std::uint8_t>(uniform_index(g, 4));
  save_volume(l, temp_file("labels.mha"));
  CHECK(load_label_volume(temp_file("labels.mha")) == l);
  CHECK(stored_volume_kind(temp_file("labels.mha")) == VolumeKind::kLabel);
  CHECK(stored_volume_kind(path) == VolumeKind::kScalar);
}

TEST_CASE("labels outside the schema are rejected") {
  LabelVolume l({2, 1, 1, 1}, {1, 1, 1, 1}, std::vector<std::uint8_t>{0, 7}, 3);
  CHECK(code_of([&] { validate_labels(l, LabelSchema{}); }) == ErrorCode::kArgument);
}

TEST_CASE("slice-wise normalisation") {
  ScalarVolume v({3, 1, 1, 3}, {1, 1, 1, 1}, std::vector<float>{2, 4, 6, 5, 5, 5, 0, 0.5f, 1});
  const auto n = normalize_slicewise(v);
  CHECK(n(0, 0, 0, 0) == 0.0f);
  CHECK(n(1, 0, 0, 0) == 0.5f);
  CHECK(n(2, 0, 0, 0) == 1.0f);
  for (int x = 0; x < 3; ++x) CHECK(n(x, 0, 0, 1) == 0.0f);
  CHECK(n(1, 0, 0, 2) == 0.5f);
  CHECK(normalize_slicewise(n) == n);
}

TEST_CASE("crop_patch windows and zero padding") {
  ScalarVolume v({4, 4, 1, 1}, {1, 1, 1, 1});
  for (std::size_t i = 0; i < 16; ++i) v.values()[i] = static_cast<float>(i + 1);
  const auto p = crop_patch(v, {1, 1}, {2, 2});
  // patch (1,1) sits on the centre, so the window starts at (0,0)
  CHECK(p.data(0, 0, 0) == v(0, 0, 0));
  CHECK(p.data(1, 1, 0) == v(1, 1, 0));

  const auto corner = crop_patch(v, {0, 0}, {4, 4});
  int zeros = 0;
  for (auto x : corner.data.values()) zeros += x == 0.0f;
  CHECK(zeros == 12);

  CHECK(crop_patch(v, {2, 2}, {4, 4}).data == v);
  CHECK(code_of([&] { crop_patch(v, {4, 0}, {2, 2}); }) == ErrorCode::kArgument);

  // re-embedding restores the window
  ScalarVolume dst({4, 4, 1, 1}, {1, 1, 1, 1});
  embed_patch(p, dst);
  CHECK(dst(0, 0, 0) == v(0, 0, 0));
  CHECK(dst(1, 1, 0) == v(1, 1, 0));
  CHECK(dst(3, 3, 0) == 0.0f);
}

TEST_CASE("pad_or_center_crop") {
  ScalarVolume v({128, 128, 1, 1}, {1, 1, 1, 1});
  for (auto& x : v.values()) x = 1.0f;
  const auto big = pad_or_center_crop(v, {256, 256});
  CHECK(big.nx() == 256);
  CHECK(big(63, 100, 0) == 0.0f);
  CHECK(big(64, 64, 0) == 1.0f);
  CHECK(big(191, 191, 0) == 1.0f);
  CHECK(big(192, 100, 0) == 0.0f);
  CHECK(pad_or_center_crop(big, {128, 128}) == v);
  CHECK(pad_or_center_crop(v, {128, 128}) == v);

  ScalarVolume w({300, 300, 1, 1}, {1, 1, 1, 1});
  for (std::size_t i = 0; i < w.size(); ++i) w.values()[i] = static_cast<float>(i);
  const auto c = pad_or_center_crop(w, {256, 256});
  CHECK(c(0, 0, 0) == w(22, 22, 0));
  CHECK(c(255, 255, 0) == w(277, 277, 0));
}
