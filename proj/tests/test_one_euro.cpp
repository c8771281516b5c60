#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <random>

#include "doctest.h"
#include "wpose/one_euro.hpp"

using namespace wpose;

TEST_CASE("alpha formula") {
  // fc=1.5 Hz, dt=1/30 s: tau = 1/(2 pi 1.5) ~ 0.10610, alpha ~ 0.23906
  const double a = one_euro_alpha(1.5, 1.0 / 30.0);
  CHECK(a == doctest::Approx(0.239057).epsilon(1e-4));
  // monotone in cutoff
  CHECK(one_euro_alpha(3.0, 1.0 / 30.0) > a);
}

TEST_CASE("first sample passes through, constant input is a fixed point") {
  OneEuroConfig cfg;
  OneEuroChannel ch;
  CHECK(ch.step(3.2, 0.0, cfg) == 3.2);
  OneEuroChannel c2;
  double t = 0;
  for (int i = 0; i < 100; ++i) {
    const double out = c2.step(5.0, t, cfg);
    CHECK(out == 5.0);
    t += 1.0 / 30.0;
  }
}

TEST_CASE("non-monotone timestamps are rejected") {
  OneEuroConfig cfg;
  OneEuroChannel ch;
  ch.step(1.0, 1.0, cfg);
  CHECK_THROWS_AS(ch.step(1.0, 1.0, cfg), NonMonotonicTime);
  CHECK_THROWS_AS(ch.step(1.0, 0.5, cfg), NonMonotonicTime);
}

TEST_CASE("a long gap resets the channel instead of spiking") {
  OneEuroConfig cfg;
  OneEuroChannel ch;
  ch.step(0.0, 0.0, cfg);
  ch.step(0.0, 1.0 / 30.0, cfg);
  // 2 s gap with a huge jump: reset returns the new value unfiltered
  CHECK(ch.step(10.0, 2.0, cfg) == 10.0);
}

TEST_CASE("output is a convex combination of input and previous state") {
  OneEuroConfig cfg;
  OneEuroChannel ch;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  double prev = ch.step(0.0, 0.0, cfg);
  double t = 0;
  for (int i = 0; i < 500; ++i) {
    t += 1.0 / 30.0;
    const double x = u(rng);
    const double out = ch.step(x, t, cfg);
    CHECK(out >= std::min(prev, x) - 1e-12);
    CHECK(out <= std::max(prev, x) + 1e-12);
    prev = out;
  }
}

TEST_CASE("white-noise jitter is reduced by at least half") {
  OneEuroConfig cfg;  // fc_min 1.5, beta 0.15
  SkeletonFilter filter(cfg);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.005);  // 5 mm

  Skeleton3D base;
  for (int k = 0; k < kKeypointCount; ++k) base.coords[k] = Vec3(0.1 * k, 0.2, 1.0);

  double in_ss = 0, out_ss = 0;
  std::size_t n = 0;
  for (int i = 0; i < 1000; ++i) {
    Skeleton3D jittered = base;
    jittered.timestamp = i / 30.0;
    for (auto& p : jittered.coords)
      p += Vec3(noise(rng), noise(rng), noise(rng));
    const Skeleton3D out = filter.filter(jittered);
    if (i < 100) continue;  // convergence
    for (int k = 0; k < kKeypointCount; ++k) {
      in_ss += (jittered.coords[k] - base.coords[k]).squaredNorm();
      out_ss += (out.coords[k] - base.coords[k]).squaredNorm();
      ++n;
    }
  }
  const double in_std = std::sqrt(in_ss / double(n));
  const double out_std = std::sqrt(out_ss / double(n));
  CHECK(out_std <= 0.5 * in_std);
}

TEST_CASE("0.5 Hz sinusoid: amplitude within 10 percent, lag under 100 ms") {
  OneEuroConfig cfg;
  OneEuroChannel ch;
  const double amp = 0.5, freq = 0.5, rate = 30.0;
  const int n = int(20 * rate);
  double sum_cos = 0, sum_sin = 0;
  int m = 0;
  for (int i = 0; i < n; ++i) {
    const double t = i / rate;
    const double x = amp * std::sin(2 * M_PI * freq * t);
    const double y = ch.step(x, t, cfg);
    if (t < 4.0) continue;  // transient
    // project onto the quadrature pair at the drive frequency
    sum_sin += y * std::sin(2 * M_PI * freq * t);
    sum_cos += y * std::cos(2 * M_PI * freq * t);
    ++m;
  }
  const double a_sin = 2.0 * sum_sin / m;
  const double a_cos = 2.0 * sum_cos / m;
  const double measured_amp = std::hypot(a_sin, a_cos);
  const double phase = std::atan2(-a_cos, a_sin);  // lag is positive
  const double lag_s = phase / (2 * M_PI * freq);
  CHECK(measured_amp == doctest::Approx(amp).epsilon(0.10));
  CHECK(lag_s < 0.100);
  CHECK(lag_s > 0.0);
}

TEST_CASE("channels are independent") {
  OneEuroConfig cfg;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> xs(200);
  for (double& x : xs) x = u(rng);

  OneEuroChannel alone;
  std::vector<double> expected;
  double t = 0;
  for (double x : xs) expected.push_back(alone.step(x, t += 1.0 / 30.0, cfg));

  // same stream through one channel of a full skeleton filter
  SkeletonFilter filter(cfg);
  t = 0;
  std::size_t i = 0;
  for (double x : xs) {
    Skeleton3D s;
    s.timestamp = t += 1.0 / 30.0;
    for (int k = 0; k < kKeypointCount; ++k)
      s.coords[k] = Vec3(x, -x, 2 * x);
    const Skeleton3D out = filter.filter(s);
    CHECK(out.coords[5].x() == expected[i]);
    ++i;
  }
}

TEST_CASE("per-skeleton filtering is comfortably under half a millisecond") {
  OneEuroConfig cfg;
  SkeletonFilter filter(cfg);
  Skeleton3D s;
  for (int k = 0; k < kKeypointCount; ++k) s.coords[k] = Vec3(k, k, k);
  // warm up
  for (int i = 0; i < 100; ++i) {
    s.timestamp = i / 30.0;
    filter.filter(s);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int reps = 2000;
  for (int i = 0; i < reps; ++i) {
    s.timestamp = (100 + i) / 30.0;
    filter.filter(s);
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count() /
      reps;
  CHECK(ms < 0.5);
}

TEST_CASE("filter_sequence and 2d filter smoke") {
  std::vector<Skeleton3D> seq(50);
  for (int i = 0; i < 50; ++i) {
    seq[std::size_t(i)].timestamp = i / 30.0;
    for (auto& p : seq[std::size_t(i)].coords) p = Vec3(1, 2, 3);
  }
  const auto out = filter_sequence(seq);
  REQUIRE(out.size() == seq.size());
  for (const auto& s : out)
    for (const auto& p : s.coords) CHECK((p - Vec3(1, 2, 3)).norm() == 0.0);

  Skeleton2DFilter f2(OneEuroConfig{});
  Skeleton2D d;
  for (auto& p : d.coords) p = Vec2(10, 20);
  d.timestamp = 0.0;
  const Skeleton2D r = f2.filter(d);
  CHECK((r.coords[0] - Vec2(10, 20)).norm() == 0.0);
}
