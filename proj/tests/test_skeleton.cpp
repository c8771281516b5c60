#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <sstream>

#include "doctest.h"
#include "wpose/skeleton.hpp"

using namespace wpose;

TEST_CASE("default topology is a 17-node tree with the pelvis root") {
  const Topology& topo = default_topology();
  CHECK_NOTHROW(topo.validate());
  CHECK(topo.root_index == kPelvis);
  CHECK(topo.names[kPelvis] == "pelvis");
  CHECK(topo.camera_assignment[kNeck] == CameraId::posture);
  CHECK(topo.camera_assignment[kLeftWrist] == CameraId::posture);
  CHECK(topo.camera_assignment[kLeftHip] == CameraId::gait);
  CHECK(topo.camera_assignment[kRightToe] == CameraId::gait);

  const auto nb = topo.neighbors(kPelvis);
  CHECK(nb.size() == 3);  // spine_mid, both hips

  Topology broken = topo;
  broken.connections[0] = {kLeftWrist, kLeftElbow};  // duplicates an edge
  CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}

TEST_CASE("root_relative") {
  const Topology& topo = default_topology();
  Skeleton3D s;
  for (int k = 0; k < kKeypointCount; ++k) s.coords[k] = Vec3(k, 2.0 * k, -k);

  SUBCASE("pelvis moves to the origin, offsets preserved") {
    Skeleton3D shifted = s;
    for (auto& p : shifted.coords) p += Vec3(5, 5, 5);
    const Skeleton3D a = root_relative(s, topo);
    const Skeleton3D b = root_relative(shifted, topo);
    CHECK(a.coords[kPelvis].norm() == 0.0);
    for (int k = 0; k < kKeypointCount; ++k)
      CHECK((a.coords[k] - b.coords[k]).norm() == 0.0);
  }

  SUBCASE("idempotent") {
    const Skeleton3D once = root_relative(s, topo);
    const Skeleton3D twice = root_relative(once, topo);
    for (int k = 0; k < kKeypointCount; ++k)
      CHECK((once.coords[k] - twice.coords[k]).norm() == 0.0);
  }

  SUBCASE("hand-checked subtraction") {
    Skeleton3D t = s;
    t.coords[kPelvis] = Vec3(1, 2, 3);
    t.coords[kLeftWrist] = Vec3(1, 2, 4);
    const Skeleton3D rel = root_relative(t, topo);
    CHECK((rel.coords[kLeftWrist] - Vec3(0, 0, 1)).norm() == 0.0);
  }
}

TEST_CASE("split_concat_coords and inverse") {
  const Topology& topo = default_topology();
  Skeleton2D s;
  for (int k = 0; k < kKeypointCount; ++k) {
    const bool gait = topo.camera_assignment[k] == CameraId::gait;
    s.coords[k] = Vec2(100.0 + k, gait ? 500.0 + k : 50.0 + k);
  }

  const auto split = split_concat_coords(s, topo, 480.0);
  CHECK(split[kNeck].camera == CameraId::posture);
  CHECK(split[kNeck].pixel.y() == doctest::Approx(50.0 + kNeck));
  CHECK(split[kLeftHip].camera == CameraId::gait);
  CHECK(split[kLeftHip].pixel.y() == doctest::Approx(500.0 + kLeftHip - 480.0));

  for (int k = 0; k < kKeypointCount; ++k) {
    const Vec2 back = to_concat_coords(split[k], 480.0);
    CHECK((back - s.coords[k]).norm() == 0.0);
  }

  Skeleton2D bad = s;
  bad.coords[kLeftHip] = Vec2(100, 100);  // gait keypoint in the posture band
  CHECK_THROWS_AS(split_concat_coords(bad, topo, 480.0), WrongHalf);
  bad = s;
  bad.coords[kNeck] = Vec2(100, 700);
  CHECK_THROWS_AS(split_concat_coords(bad, topo, 480.0), WrongHalf);
}

TEST_CASE("limb_lengths") {
  const Topology& topo = default_topology();
  Skeleton3D s;
  for (auto& p : s.coords) p = Vec3(1, 1, 1);
  const auto zero = limb_lengths(s, topo);
  for (double l : zero) CHECK(l == 0.0);

  s.coords[kSpineMid] = s.coords[kPelvis] + Vec3(0, 1, 0);
  const auto one = limb_lengths(s, topo);
  CHECK(one[0] == doctest::Approx(1.0));  // pelvis-spine connection is index 0
}

TEST_CASE("sequence files round trip bit-exactly") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2, 2);

  SUBCASE("3d") {
    std::vector<Skeleton3D> seq(7);
    double t = 0;
    for (auto& s : seq) {
      s.timestamp = t += 1.0 / 30.0;
      for (auto& p : s.coords) p = Vec3(u(rng), u(rng), u(rng) + 3.0);
    }
    std::ostringstream first;
    write_sequence_3d(first, seq, default_topology());
    std::istringstream in(first.str());
    const auto loaded = read_sequence_3d(in);
    REQUIRE(loaded.size() == seq.size());
    std::ostringstream second;
    write_sequence_3d(second, loaded, default_topology());
    CHECK(first.str() == second.str());
  }

  SUBCASE("2d") {
    std::vector<Skeleton2D> seq(5);
    double t = 0;
    for (auto& s : seq) {
      s.timestamp = t += 0.033;
      for (int k = 0; k < kKeypointCount; ++k) {
        s.coords[k] = Vec2(320 + 100 * u(rng), 480 + 200 * u(rng));
        s.confidence[k] = 0.5 + 0.25 * u(rng) / 2.0;
        s.depth_at_kp[k] = u(rng) > 1.5 ? 0.0 : 1.0 + u(rng) / 4.0;
      }
    }
    std::ostringstream first;
    write_sequence_2d(first, seq, default_topology());
    std::istringstream in(first.str());
    const auto loaded = read_sequence_2d(in);
    REQUIRE(loaded.size() == seq.size());
    std::ostringstream second;
    write_sequence_2d(second, loaded, default_topology());
    CHECK(first.str() == second.str());
  }

  SUBCASE("header is validated") {
    std::istringstream in("not a header\n1,2,3\n");
    CHECK_THROWS_AS(read_sequence_3d(in), SequenceIoError);
  }

  SUBCASE("malformed records are reported with the line number") {
    std::istringstream in(
        "# wpose-skel3d v1 topology=walker17 format=timestamp,17x(x,y,z)\n"
        "1,2,3\n");
    CHECK_THROWS_WITH_AS(read_sequence_3d(in), doctest::Contains("line 2"),
                         SequenceIoError);
  }
}
