#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "wpose/metrics.hpp"

using namespace wpose;
using namespace wpose::metrics;

namespace {

std::vector<Skeleton3D> random_seq(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Skeleton3D> out(n);
  double t = 0;
  for (auto& s : out) {
    s.timestamp = t += 1.0 / 30.0;
    for (auto& p : s.coords) p = Vec3(u(rng), u(rng), u(rng) + 1.0);
  }
  return out;
}

}  // namespace

TEST_CASE("mpjpe family zero and translation behavior") {
  const Topology& topo = default_topology();
  std::mt19937_64 rng(41);
  const auto gt = random_seq(rng, 10);

  CHECK(mpjpe_mm(gt, gt, topo) == 0.0);
  CHECK(a_mpjpe_mm(gt, gt) == 0.0);
  CHECK(pa_mpjpe_mm(gt, gt) < 1e-6);
  CHECK(pck_3d_pct(gt, gt, topo, 75.0) == 100.0);

  // uniform 10 mm offset per axis: root alignment cancels it
  auto shifted = gt;
  for (auto& s : shifted)
    for (auto& p : s.coords) p += Vec3(0.010, 0.010, 0.010);
  CHECK(mpjpe_mm(shifted, gt, topo) < 1e-9);
  // absolute error keeps it: |(10,10,10)| mm = sqrt(300) ~ 17.32 mm
  CHECK(a_mpjpe_mm(shifted, gt) == doctest::Approx(std::sqrt(300.0)).epsilon(1e-9));
}

TEST_CASE("mpjpe hand-computed single-joint case") {
  const Topology& topo = default_topology();
  std::mt19937_64 rng(7);
  auto gt = random_seq(rng, 1);
  auto pred = gt;
  pred[0].coords[kLeftKnee] += Vec3(0.017, 0, 0);  // 17 mm on one joint
  CHECK(mpjpe_mm(pred, gt, topo) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pa_mpjpe absorbs similarity transforms and never exceeds mpjpe") {
  const Topology& topo = default_topology();
  std::mt19937_64 rng(43);
  const auto gt = random_seq(rng, 8);

  SUBCASE("similarity transform of gt scores zero") {
    Mat3 rot;
    const double a = 0.6;
    rot << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    auto pred = gt;
    for (auto& s : pred)
      for (auto& p : s.coords) p = 1.3 * (rot * p) + Vec3(0.2, -0.1, 0.4);
    CHECK(pa_mpjpe_mm(pred, gt) < 1e-6);
  }

  SUBCASE("alignment can only reduce the error") {
    std::normal_distribution<double> noise(0.0, 0.010);
    for (int rep = 0; rep < 20; ++rep) {
      auto pred = gt;
      for (auto& s : pred)
        for (auto& p : s.coords) p += Vec3(noise(rng), noise(rng), noise(rng));
      CHECK(pa_mpjpe_mm(pred, gt) <= mpjpe_mm(pred, gt, topo) + 1e-12);
    }
  }
}

TEST_CASE("2d error and pck") {
  std::vector<Skeleton2D> gt(1), pred(1);
  for (int k = 0; k < kKeypointCount; ++k) {
    gt[0].coords[k] = Vec2(100 + k, 200);
    pred[0].coords[k] = gt[0].coords[k];
  }
  CHECK(mpjpe_2d_px(pred, gt) == 0.0);
  pred[0].coords[4] += Vec2(3, 4);  // error 5 px on one of 17 joints
  CHECK(mpjpe_2d_px(pred, gt) == doctest::Approx(5.0 / 17.0).epsilon(1e-12));
  CHECK(pck_2d_pct(pred, gt, 6.0) == 100.0);
  CHECK(pck_2d_pct(pred, gt, 4.999) ==
        doctest::Approx(100.0 * 16.0 / 17.0).epsilon(1e-9));
  // boundary counts as correct
  CHECK(pck_2d_pct(pred, gt, 5.0) == 100.0);
}

TEST_CASE("pck: half at zero, half at twice the threshold; monotone") {
  const Topology& topo = default_topology();
  std::vector<Skeleton3D> gt(2), pred(2);
  for (auto& s : gt)
    for (int k = 0; k < kKeypointCount; ++k) s.coords[k] = Vec3(k, 0, 1);
  pred = gt;
  // move every joint of frame 1 by 150 mm (threshold 75): frame 0 perfect
  for (auto& p : pred[1].coords) p += Vec3(0.15, 0, 0);
  const double pct = pck_3d_pct(pred, gt, topo, 75.0, Alignment::none);
  CHECK(pct == doctest::Approx(50.0));
  CHECK(pck_3d_pct(pred, gt, topo, 150.0, Alignment::none) >= pct);
  CHECK(pck_3d_pct(pred, gt, topo, 151.0, Alignment::none) == 100.0);
}

TEST_CASE("length mismatch is reported") {
  const Topology& topo = default_topology();
  std::mt19937_64 rng(47);
  const auto a = random_seq(rng, 4);
  const auto b = random_seq(rng, 5);
  CHECK_THROWS_AS(mpjpe_mm(a, b, topo), LengthMismatch);
  CHECK_THROWS_AS((void)evaluate_3d({}, {}, topo), LengthMismatch);
}

TEST_CASE("latency statistics") {
  const LatencyStats c = latency_stats({10, 10, 10});
  CHECK(c.mean == doctest::Approx(10.0));
  CHECK(c.stddev == 0.0);

  // population estimator: std of {10, 20} is 5
  const LatencyStats two = latency_stats({10, 20});
  CHECK(two.mean == doctest::Approx(15.0));
  CHECK(two.stddev == doctest::Approx(5.0));
  CHECK(two.se == doctest::Approx(5.0 / std::sqrt(2.0)));

  SUBCASE("p95 of a known distribution") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> xs(1000);
    for (double& x : xs) x = u(rng);
    const LatencyStats s = latency_stats(xs);
    CHECK(s.p95 == doctest::Approx(95.0).epsilon(0.05));
    CHECK(s.p50 == doctest::Approx(50.0).epsilon(0.05));
  }

  CHECK_THROWS_AS(latency_stats({}), EmptySamples);
}

TEST_CASE("report assembly, text and json output") {
  const Topology& topo = default_topology();
  std::mt19937_64 rng(59);
  const auto gt = random_seq(rng, 12);
  auto pred = gt;
  std::normal_distribution<double> noise(0.0, 0.004);
  for (auto& s : pred)
    for (auto& p : s.coords) p += Vec3(noise(rng), noise(rng), noise(rng));

  const MetricsReport rep = evaluate_3d(pred, gt, topo, 75.0);
  CHECK(rep.has_3d);
  CHECK(rep.n_frames == 12);
  CHECK(rep.mpjpe_mm.mean > 0.0);
  CHECK(rep.mpjpe_mm.se >= 0.0);
  CHECK(rep.pa_mpjpe_mm.mean <= rep.mpjpe_mm.mean + 1e-9);
  CHECK(rep.pck3d_pct >= 0.0);
  CHECK(rep.pck3d_pct <= 100.0);
  for (const auto& b : rep.per_joint) {
    CHECK(b.q1 <= b.median);
    CHECK(b.median <= b.q3);
    CHECK(b.lo_whisker <= b.q1);
    CHECK(b.hi_whisker >= b.q3);
  }

  const std::string text = to_text(rep, topo);
  CHECK(text.find("MPJPE") != std::string::npos);
  const std::string json = to_json(rep, topo);
  CHECK(json.find("\"mpjpe_mm\"") != std::string::npos);
  CHECK(json.find("standard_error") != std::string::npos);
  const std::string table = per_joint_table(rep, topo);
  CHECK(table.find("left_knee") != std::string::npos);
}
