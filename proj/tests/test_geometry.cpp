#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "wpose/geometry.hpp"
#include "wpose/skeleton.hpp"

using namespace wpose;

namespace {

CameraIntrinsics test_cam() {
  CameraIntrinsics cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = 64.0;
  cam.cy = 112.0;
  cam.width = 128;
  cam.height = 224;
  cam.depth_min = 0.1;
  cam.depth_max = 10.0;
  return cam;
}

Mat3 rot_z(double angle) {
  Mat3 r;
  r << std::cos(angle), -std::sin(angle), 0, std::sin(angle), std::cos(angle),
      0, 0, 0, 1;
  return r;
}

}  // namespace

TEST_CASE("project: principal ray and unit offset") {
  const CameraIntrinsics cam = test_cam();
  const Vec2 center = project({0, 0, 2}, cam);
  CHECK(center.x() == doctest::Approx(64.0));
  CHECK(center.y() == doctest::Approx(112.0));

  const Vec2 off = project({1, 0, 2}, cam);
  CHECK(off.x() == doctest::Approx(114.0));
  CHECK(off.y() == doctest::Approx(112.0));

  CHECK_THROWS_AS(project({0, 0, 0}, cam), NonPositiveDepth);
  CHECK_THROWS_AS(project({0, 0, -1}, cam), NonPositiveDepth);
}

TEST_CASE("backproject: inverse of project") {
  const CameraIntrinsics cam = test_cam();
  const Vec3 p = backproject({64, 112}, 2.0, cam);
  CHECK(p.x() == doctest::Approx(0.0));
  CHECK(p.y() == doctest::Approx(0.0));
  CHECK(p.z() == doctest::Approx(2.0));

  const Vec3 q = backproject({114, 112}, 2.0, cam);
  CHECK((q - Vec3(1, 0, 2)).norm() < 1e-9);

  CHECK_THROWS_AS(backproject({10, 10}, 0.0, cam), InvalidDepth);  // dead pixel
  CHECK_THROWS_AS(backproject({10, 10}, 11.0, cam), InvalidDepth);
  CHECK_THROWS_AS(backproject({10, 10}, std::nan(""), cam), InvalidDepth);
}

TEST_CASE("project/backproject are mutual inverses on random points") {
  const CameraIntrinsics cam = test_cam();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> xy(-1.5, 1.5), z(0.2, 9.5);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(xy(rng), xy(rng), z(rng));
    const Vec2 px = project(p, cam);
    const Vec3 back = backproject(px, p.z(), cam);
    CHECK((back - p).norm() < 1e-9);
    const Vec2 again = project(back, cam);
    CHECK((again - px).norm() < 1e-9);
  }
}

TEST_CASE("rigid transforms: apply, compose, invert") {
  RigidTransform t;
  CHECK((apply_transform(t, {1, 2, 3}) - Vec3(1, 2, 3)).norm() == 0.0);

  RigidTransform r90;
  r90.rotation = rot_z(M_PI / 2);
  const Vec3 rotated = apply_transform(r90, {1, 0, 0});
  CHECK((rotated - Vec3(0, 1, 0)).norm() < 1e-12);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  RigidTransform a;
  a.rotation = rot_z(0.7);
  a.translation = {0.3, -1.0, 2.0};
  a.scale = 1.7;
  const RigidTransform ident = compose(a, invert(a));
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    CHECK((apply_transform(ident, p) - p).norm() < 1e-9);
    CHECK((apply_transform(invert(a), apply_transform(a, p)) - p).norm() < 1e-9);
  }
}

TEST_CASE("apply_transform with scale 1 is an isometry") {
  RigidTransform t;
  t.rotation = rot_z(1.1);
  t.translation = {4, 5, 6};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
    const double before = (p - q).norm();
    const double after = (apply_transform(t, p) - apply_transform(t, q)).norm();
    CHECK(std::abs(before - after) < 1e-9);
  }
}

TEST_CASE("procrustes_fit recovers a constructed similarity") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> src;
  for (int i = 0; i < 12; ++i) src.push_back({u(rng), u(rng), u(rng)});

  SUBCASE("identity") {
    const RigidTransform t = procrustes_fit(src, src);
    CHECK((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(t.translation.norm() < 1e-9);
    CHECK(t.scale == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("scale 2, 90 degrees, offset (1,2,3)") {
    RigidTransform truth;
    truth.rotation = rot_z(M_PI / 2);
    truth.translation = {1, 2, 3};
    truth.scale = 2.0;
    std::vector<Vec3> dst;
    for (const Vec3& p : src) dst.push_back(apply_transform(truth, p));
    const RigidTransform fit = procrustes_fit(src, dst);
    CHECK((fit.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((fit.translation - truth.translation).norm() < 1e-6);
    CHECK(fit.scale == doctest::Approx(2.0).epsilon(1e-6));
    for (std::size_t i = 0; i < src.size(); ++i)
      CHECK((apply_transform(fit, src[i]) - dst[i]).norm() < 1e-6);
  }

  SUBCASE("collinear points are degenerate") {
    std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    CHECK_THROWS_AS(procrustes_fit(line, line), DegenerateConfiguration);
    std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(procrustes_fit(two, two), DegenerateConfiguration);
  }

  SUBCASE("rigid-only flag holds scale at 1") {
    std::vector<Vec3> dst;
    for (const Vec3& p : src) dst.push_back(2.0 * p);
    const RigidTransform fit = procrustes_fit(src, dst, /*with_scale=*/false);
    CHECK(fit.scale == 1.0);
  }
}

TEST_CASE("align_skeleton_to_camera") {
  const Topology& topo = default_topology();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Skeleton3D skel;
  for (auto& p : skel.coords) p = Vec3(u(rng), u(rng), u(rng));

  const std::array<Vec3, 2> handles = {Vec3(0.2, 0.1, 0.5), Vec3(-0.2, 0.1, 0.5)};

  SUBCASE("translation invariance") {
    Skeleton3D shifted = skel;
    for (auto& p : shifted.coords) p += Vec3(1, 1, 1);
    const Skeleton3D a = align_skeleton_to_camera(skel, Mat3::Identity(), handles, topo);
    const Skeleton3D b = align_skeleton_to_camera(shifted, Mat3::Identity(), handles, topo);
    for (int k = 0; k < kKeypointCount; ++k)
      CHECK((a.coords[k] - b.coords[k]).norm() < 1e-9);
  }

  SUBCASE("wrist midpoint lands on handle midpoint under a 90 degree yaw") {
    const Mat3 yaw = rot_z(M_PI / 2);
    const Skeleton3D out = align_skeleton_to_camera(skel, yaw, handles, topo);
    const Vec3 wrist_mid = 0.5 * (out.coords[kLeftWrist] + out.coords[kRightWrist]);
    const Vec3 handle_mid = 0.5 * (handles[0] + handles[1]);
    CHECK((wrist_mid - handle_mid).norm() < 1e-12);
  }

  SUBCASE("pre-centered skeleton with aligned wrists stays put") {
    Skeleton3D centered = skel;
    Vec3 c = Vec3::Zero();
    for (const auto& p : centered.coords) c += p;
    c /= double(kKeypointCount);
    for (auto& p : centered.coords) p -= c;
    const Vec3 wrist_mid =
        0.5 * (centered.coords[kLeftWrist] + centered.coords[kRightWrist]);
    const std::array<Vec3, 2> at_wrists = {wrist_mid, wrist_mid};
    const Skeleton3D out =
        align_skeleton_to_camera(centered, Mat3::Identity(), at_wrists, topo);
    for (int k = 0; k < kKeypointCount; ++k)
      CHECK((out.coords[k] - centered.coords[k]).norm() < 1e-12);
  }

  SUBCASE("degenerate skeleton") {
    Skeleton3D flat;
    for (auto& p : flat.coords) p = Vec3(1, 1, 1);
    CHECK_THROWS_AS(
        align_skeleton_to_camera(flat, Mat3::Identity(), handles, topo),
        DegenerateSkeleton);
  }
}

TEST_CASE("calibration file round trip and validation") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "wpose_geom_test";
  fs::create_directories(dir);
  const std::string path = (dir / "calib.json").string();

  CameraRig rig;
  rig.posture = test_cam();
  rig.gait = test_cam();
  rig.gait_to_posture.rotation = rot_z(0.3);
  rig.gait_to_posture.translation = {0, 0.6, -0.4};
  rig.gait_to_posture.scale = 1.0;

  save_calibration(rig, path);
  const CameraRig loaded = load_calibration(path);
  CHECK(loaded.posture.fx == rig.posture.fx);
  CHECK((loaded.gait_to_posture.rotation - rig.gait_to_posture.rotation)
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  SUBCASE("distortion fields are rejected loudly") {
    std::ofstream out(path);
    out << R"({"posture":{"fx":100,"fy":100,"cx":64,"cy":112,"width":128,
"height":224,"depth_min":0.1,"depth_max":10,"distortion":[0.1,0.2]},
"gait":{"fx":100,"fy":100,"cx":64,"cy":112,"width":128,"height":224,
"depth_min":0.1,"depth_max":10},
"gait_to_posture":{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,0],"scale":1}})";
    out.close();
    CHECK_THROWS_WITH_AS(load_calibration(path),
                         doctest::Contains("distortion"), CalibrationError);
  }

  SUBCASE("invariant violations name the offending field") {
    CameraRig bad = rig;
    bad.posture.fx = -5;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("posture.fx"),
                         CalibrationError);
    bad = rig;
    bad.gait_to_posture.scale = 2.0;
    CHECK_THROWS_AS(bad.validate(), CalibrationError);
    bad = rig;
    bad.gait_to_posture.rotation(0, 0) = 2.0;
    CHECK_THROWS_AS(bad.validate(), CalibrationError);
  }
}
