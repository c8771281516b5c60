#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "wpose/preprocess.hpp"

using namespace wpose;

TEST_CASE("preprocess: blank input maps to all zeros") {
  const ModelInput mi = preprocess(FramePair::blank());
  CHECK(mi.width == kModelWidth);
  CHECK(mi.height == kModelHeight);
  for (float v : mi.gray) CHECK(v == 0.0f);
  for (float v : mi.depth) CHECK(v == 0.0f);
}

TEST_CASE("preprocess: depth normalization and camera stacking") {
  FramePair fp = FramePair::blank();
  std::fill(fp.posture_depth.begin(), fp.posture_depth.end(), std::uint16_t(3000));
  std::fill(fp.gait_depth.begin(), fp.gait_depth.end(), std::uint16_t(7000));
  std::fill(fp.posture_rgb.begin(), fp.posture_rgb.end(), std::uint8_t(51));
  std::fill(fp.gait_rgb.begin(), fp.gait_rgb.end(), std::uint8_t(102));

  const ModelInput mi = preprocess(fp);
  // posture occupies concatenated rows [0, 480) -> model rows [0, 112)
  CHECK(mi.depth[0] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(mi.depth[std::size_t(111) * kModelWidth] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(mi.depth[std::size_t(112) * kModelWidth] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(mi.depth[std::size_t(223) * kModelWidth] == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(mi.gray[0] == doctest::Approx(51.0 / 255).epsilon(1e-6));
  CHECK(mi.gray[std::size_t(223) * kModelWidth] == doctest::Approx(102.0 / 255).epsilon(1e-6));
}

TEST_CASE("preprocess: depth beyond max clamps to exactly 1") {
  FramePair fp = FramePair::blank();
  std::fill(fp.posture_depth.begin(), fp.posture_depth.end(), std::uint16_t(20000));
  const ModelInput mi = preprocess(fp);
  CHECK(mi.depth[0] == 1.0f);
}

TEST_CASE("preprocess: shape mismatch") {
  FramePair fp = FramePair::blank();
  fp.gait_depth.resize(100);
  CHECK_THROWS_AS(preprocess(fp), ShapeMismatch);
}

TEST_CASE("area resize is an exact-footprint mean") {
  SUBCASE("constant image stays constant") {
    std::vector<float> src(std::size_t(640) * 960, 0.37f);
    std::vector<float> dst(std::size_t(kModelWidth) * kModelHeight);
    area_resize(src.data(), 640, 960, dst.data(), kModelWidth, kModelHeight);
    for (float v : dst) CHECK(v == doctest::Approx(0.37).epsilon(1e-6));
  }

  SUBCASE("integer footprint equals the plain block mean") {
    // 8x8 -> 2x2: each output pixel is the mean of a 4x4 block
    std::vector<float> src(64);
    for (int i = 0; i < 64; ++i) src[std::size_t(i)] = float(i) / 64.0f;
    std::vector<float> dst(4);
    area_resize(src.data(), 8, 8, dst.data(), 2, 2);
    double block = 0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) block += src[std::size_t(y) * 8 + x];
    CHECK(dst[0] == doctest::Approx(block / 16.0).epsilon(1e-6));
  }

  SUBCASE("values stay inside [0,1]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> src(std::size_t(640) * 960);
    for (float& v : src) v = u(rng);
    std::vector<float> dst(std::size_t(kModelWidth) * kModelHeight);
    area_resize(src.data(), 640, 960, dst.data(), kModelWidth, kModelHeight);
    for (float v : dst) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("nearest resize introduces no values absent from the source") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> src(std::size_t(64) * 96);
  for (float& v : src) v = u(rng);
  std::vector<float> dst(std::size_t(17) * 23);
  nearest_resize(src.data(), 64, 96, dst.data(), 17, 23);
  const std::set<float> present(src.begin(), src.end());
  for (float v : dst) CHECK(present.count(v) == 1);
}

TEST_CASE("downsample_sequence") {
  SUBCASE("30 Hz to 10 Hz over 90 uniform frames keeps every third") {
    std::vector<double> ts(90);
    for (int i = 0; i < 90; ++i) ts[std::size_t(i)] = i / 30.0;
    const auto idx = downsample_sequence(ts, 30.0, 10.0);
    REQUIRE(idx.size() == 30);
    for (std::size_t k = 0; k < idx.size(); ++k) CHECK(idx[k] == 3 * k);
  }

  SUBCASE("target equals source: identity selection") {
    std::vector<double> ts(30);
    for (int i = 0; i < 30; ++i) ts[std::size_t(i)] = i / 30.0;
    const auto idx = downsample_sequence(ts, 30.0, 30.0);
    REQUIRE(idx.size() == 30);
    for (std::size_t k = 0; k < idx.size(); ++k) CHECK(idx[k] == k);
  }

  SUBCASE("a dropped frame never duplicates an index") {
    std::vector<double> ts;
    for (int i = 0; i < 90; ++i)
      if (i != 31) ts.push_back(i / 30.0);
    const auto idx = downsample_sequence(ts, 30.0, 10.0);
    for (std::size_t k = 1; k < idx.size(); ++k) CHECK(idx[k] > idx[k - 1]);
    CHECK(idx.size() >= 29);
    // output rate within 1 percent over the span
    const double span = ts[idx.back()] - ts[idx.front()];
    const double rate = double(idx.size() - 1) / span;
    CHECK(rate == doctest::Approx(10.0).epsilon(0.01));
  }

  SUBCASE("empty input") {
    CHECK_THROWS_AS(downsample_sequence({}, 30.0, 10.0), EmptySequence);
  }
}

TEST_CASE("coord_rescale") {
  const Vec2 a = coord_rescale({320, 480}, kModelWidth, kModelHeight);
  CHECK(a.x() == doctest::Approx(64.0));
  CHECK(a.y() == doctest::Approx(112.0));
  const Vec2 zero = coord_rescale({0, 0}, kModelWidth, kModelHeight);
  CHECK(zero.norm() == 0.0);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 639), v(0, 959);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p(u(rng), v(rng));
    const Vec2 back = coord_rescale_inverse(
        coord_rescale(p, kModelWidth, kModelHeight), kModelWidth, kModelHeight);
    CHECK((back - p).norm() < 1e-9);
  }
}

TEST_CASE("frame directory round trip") {
  namespace fs = std::filesystem;
  const std::string dir =
      (fs::temp_directory_path() / "wpose_frames_test").string();
  std::vector<FramePair> frames;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 3; ++i) {
    FramePair fp = FramePair::blank(i / 30.0);
    for (std::size_t p = 0; p < fp.posture_depth.size(); ++p) {
      const std::uint8_t g = std::uint8_t(rng());
      fp.posture_rgb[3 * p] = fp.posture_rgb[3 * p + 1] = fp.posture_rgb[3 * p + 2] = g;
      fp.posture_depth[p] = std::uint16_t(rng() % 10000);
      fp.gait_depth[p] = std::uint16_t(rng() % 10000);
    }
    frames.push_back(std::move(fp));
  }
  write_frame_dir(dir, frames);

  FrameDirSource source(dir);
  REQUIRE(source.size() == 3);
  const FramePair back = source.frame(1);
  CHECK(back.timestamp == doctest::Approx(frames[1].timestamp));
  CHECK(back.posture_depth == frames[1].posture_depth);
  CHECK(back.gait_depth == frames[1].gait_depth);
  CHECK(back.posture_rgb == frames[1].posture_rgb);  // gray storage is lossless here
}
