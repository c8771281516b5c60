#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "wpose/kernels.hpp"

using namespace wpose::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, int n, double lo = -2.0,
                               double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = dist(rng);
  return out;
}

std::vector<float> random_vecf(std::mt19937_64& rng, int n, float lo = -2.0f,
                               float hi = 2.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> out(static_cast<std::size_t>(n));
  for (float& v : out) v = dist(rng);
  return out;
}

}  // namespace

TEST_CASE("scalar reference kernels: basic semantics") {
  const Ops& k = scalar_ops();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(k.dot(a.data(), b.data(), 3) == doctest::Approx(32.0));

  std::vector<double> w{1, 0, 0, 1, 1, 1};  // 2x3
  std::vector<double> y(2);
  k.matvec(w.data(), a.data(), y.data(), 2, 3);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(2.0 + 3.0 + 1.0 * 1.0 + 0.0).epsilon(1e-12));

  std::vector<double> g{-0.5, 0.1, 0.5, 0.25};
  k.clip(g.data(), 4, -0.2, 0.2);
  CHECK(g[0] == -0.2);
  CHECK(g[1] == doctest::Approx(0.1));
  CHECK(g[2] == 0.2);
  CHECK(g[3] == 0.2);
}

TEST_CASE("gaussian_row scalar matches the analytic form") {
  const Ops& k = scalar_ops();
  std::vector<float> row(16);
  const double sigma = 3.0;
  k.gaussian_row(row.data(), 16, 5.0f, 4.0f, float(1.0 / (2 * sigma * sigma)));
  for (int i = 0; i < 16; ++i) {
    const double d2 = (i - 5.0) * (i - 5.0) + 4.0;
    CHECK(row[std::size_t(i)] ==
          doctest::Approx(std::exp(-d2 / (2 * sigma * sigma))).epsilon(1e-6));
  }
}

TEST_CASE("softargmax_sums scalar: clamps negatives, tracks raw max") {
  const Ops& k = scalar_ops();
  // 2x2 map with one negative entry
  std::vector<float> map{-1.0f, 0.0f, 0.5f, 0.25f};
  double mass = 0, mu = 0, mv = 0;
  float mx = 0;
  k.softargmax_sums(map.data(), 2, 2, &mass, &mu, &mv, &mx);
  CHECK(mass == doctest::Approx(0.75));
  CHECK(mu == doctest::Approx(0.25));   // 0.5*0 + 0.25*1
  CHECK(mv == doctest::Approx(0.75));   // both positives in row 1
  CHECK(mx == doctest::Approx(0.5f));
}

TEST_CASE("rgb_to_gray uses 601 luminance weights") {
  const Ops& k = scalar_ops();
  std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255};
  std::vector<float> gray(4);
  k.rgb_to_gray_unit(rgb.data(), gray.data(), 4);
  CHECK(gray[0] == doctest::Approx(0.299).epsilon(1e-6));
  CHECK(gray[1] == doctest::Approx(0.587).epsilon(1e-6));
  CHECK(gray[2] == doctest::Approx(0.114).epsilon(1e-6));
  CHECK(gray[3] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("depth_mm_to_unit clamps at 1") {
  const Ops& k = scalar_ops();
  std::vector<std::uint16_t> mm{0, 5000, 10000, 20000, 65535};
  std::vector<float> out(mm.size());
  k.depth_mm_to_unit(mm.data(), out.data(), int(mm.size()), 1.0f / 10000.0f);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(out[2] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out[3] == 1.0f);
  CHECK(out[4] == 1.0f);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const Ops* simd = avx2_ops();
  if (!simd) {
    MESSAGE("AVX2 unavailable on this host; equivalence checked elsewhere");
    return;
  }
  const Ops& ref = scalar_ops();
  std::mt19937_64 rng(42);

  for (int n : {1, 3, 7, 8, 17, 51, 64, 255, 256, 1000}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);

    CHECK(simd->dot(a.data(), b.data(), n) ==
          doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-11));
    CHECK(simd->sum_sq(a.data(), n) ==
          doctest::Approx(ref.sum_sq(a.data(), n)).epsilon(1e-11));

    auto y1 = b, y2 = b;
    ref.axpy(0.37, a.data(), y1.data(), n);
    simd->axpy(0.37, a.data(), y2.data(), n);
    for (int i = 0; i < n; ++i)
      CHECK(y1[std::size_t(i)] == doctest::Approx(y2[std::size_t(i)]).epsilon(1e-12));

    auto c1 = a, c2 = a;
    ref.clip(c1.data(), n, -0.2, 0.2);
    simd->clip(c2.data(), n, -0.2, 0.2);
    for (int i = 0; i < n; ++i) CHECK(c1[std::size_t(i)] == c2[std::size_t(i)]);
  }

  SUBCASE("matvec family") {
    const int rows = 51, cols = 256;
    auto w = random_vec(rng, rows * cols);
    auto x = random_vec(rng, cols);
    auto g = random_vec(rng, rows);
    std::vector<double> y1(rows), y2(rows);
    ref.matvec(w.data(), x.data(), y1.data(), rows, cols);
    simd->matvec(w.data(), x.data(), y2.data(), rows, cols);
    for (int i = 0; i < rows; ++i)
      CHECK(y1[std::size_t(i)] == doctest::Approx(y2[std::size_t(i)]).epsilon(1e-11));

    std::vector<double> dx1(cols, 0.1), dx2(cols, 0.1);
    ref.matvec_t_acc(w.data(), g.data(), dx1.data(), rows, cols);
    simd->matvec_t_acc(w.data(), g.data(), dx2.data(), rows, cols);
    for (int i = 0; i < cols; ++i)
      CHECK(dx1[std::size_t(i)] == doctest::Approx(dx2[std::size_t(i)]).epsilon(1e-10));

    auto dw1 = random_vec(rng, rows * cols);
    auto dw2 = dw1;
    ref.ger_acc(dw1.data(), g.data(), x.data(), rows, cols);
    simd->ger_acc(dw2.data(), g.data(), x.data(), rows, cols);
    for (std::size_t i = 0; i < dw1.size(); ++i)
      CHECK(dw1[i] == doctest::Approx(dw2[i]).epsilon(1e-11));
  }

  SUBCASE("adam_step") {
    const int n = 301;
    auto w1 = random_vec(rng, n);
    auto w2 = w1;
    auto m1 = random_vec(rng, n, 0.0, 0.1);
    auto m2 = m1;
    auto v1 = random_vec(rng, n, 0.0, 0.1);
    auto v2 = v1;
    auto g = random_vec(rng, n, -0.2, 0.2);
    ref.adam_step(w1.data(), m1.data(), v1.data(), g.data(), n, 1e-3, 0.9,
                  0.999, 0.2, 0.05, 1e-8);
    simd->adam_step(w2.data(), m2.data(), v2.data(), g.data(), n, 1e-3, 0.9,
                    0.999, 0.2, 0.05, 1e-8);
    for (int i = 0; i < n; ++i) {
      CHECK(w1[std::size_t(i)] == doctest::Approx(w2[std::size_t(i)]).epsilon(1e-12));
      CHECK(m1[std::size_t(i)] == doctest::Approx(m2[std::size_t(i)]).epsilon(1e-12));
      CHECK(v1[std::size_t(i)] == doctest::Approx(v2[std::size_t(i)]).epsilon(1e-12));
    }
  }

  SUBCASE("gaussian_row: vector exp vs libm") {
    for (int n : {5, 8, 33, 200}) {
      std::vector<float> r1(static_cast<std::size_t>(n)), r2(static_cast<std::size_t>(n));
      ref.gaussian_row(r1.data(), n, 7.3f, 2.25f, 1.0f / 18.0f);
      simd->gaussian_row(r2.data(), n, 7.3f, 2.25f, 1.0f / 18.0f);
      for (int i = 0; i < n; ++i)
        CHECK(std::abs(r1[std::size_t(i)] - r2[std::size_t(i)]) < 2e-6f);
    }
  }

  SUBCASE("softargmax_sums") {
    for (auto [w, h] : {std::pair{64, 112}, {7, 5}, {1, 9}}) {
      auto map = random_vecf(rng, w * h, -0.2f, 1.0f);
      double mass1, mu1, mv1, mass2, mu2, mv2;
      float mx1, mx2;
      ref.softargmax_sums(map.data(), w, h, &mass1, &mu1, &mv1, &mx1);
      simd->softargmax_sums(map.data(), w, h, &mass2, &mu2, &mv2, &mx2);
      CHECK(mass1 == doctest::Approx(mass2).epsilon(1e-12));
      CHECK(mu1 == doctest::Approx(mu2).epsilon(1e-12));
      CHECK(mv1 == doctest::Approx(mv2).epsilon(1e-12));
      CHECK(mx1 == mx2);
    }
  }

  SUBCASE("frame conversions") {
    const int npx = 640 * 3 + 11;  // odd tail
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(npx) * 3);
    std::mt19937_64 r2(7);
    for (auto& v : rgb) v = std::uint8_t(r2());
    std::vector<float> g1(static_cast<std::size_t>(npx)), g2(static_cast<std::size_t>(npx));
    ref.rgb_to_gray_unit(rgb.data(), g1.data(), npx);
    simd->rgb_to_gray_unit(rgb.data(), g2.data(), npx);
    for (int i = 0; i < npx; ++i)
      CHECK(std::abs(g1[std::size_t(i)] - g2[std::size_t(i)]) < 2e-7f);

    std::vector<std::uint16_t> mm(static_cast<std::size_t>(npx));
    for (auto& v : mm) v = std::uint16_t(r2());
    std::vector<float> d1(static_cast<std::size_t>(npx)), d2(static_cast<std::size_t>(npx));
    ref.depth_mm_to_unit(mm.data(), d1.data(), npx, 1e-4f);
    simd->depth_mm_to_unit(mm.data(), d2.data(), npx, 1e-4f);
    for (int i = 0; i < npx; ++i) CHECK(d1[std::size_t(i)] == d2[std::size_t(i)]);

    auto x = random_vecf(rng, npx);
    auto ya = random_vecf(rng, npx);
    auto yb = ya;
    ref.saxpy(0.77f, x.data(), ya.data(), npx);
    simd->saxpy(0.77f, x.data(), yb.data(), npx);
    for (int i = 0; i < npx; ++i)
      CHECK(ya[std::size_t(i)] == doctest::Approx(yb[std::size_t(i)]).epsilon(1e-6));

    CHECK(ref.mse(x.data(), ya.data(), std::size_t(npx)) ==
          doctest::Approx(simd->mse(x.data(), ya.data(), std::size_t(npx)))
              .epsilon(1e-10));
  }
}

TEST_CASE("backend dispatch and forcing") {
  CHECK(backend_available(Backend::scalar));
  const Backend initial = active_backend();
  force_backend(Backend::scalar);
  CHECK(active_backend() == Backend::scalar);
  CHECK(std::string(ops().name) == "scalar");
  if (backend_available(Backend::avx2)) {
    force_backend(Backend::avx2);
    CHECK(active_backend() == Backend::avx2);
    CHECK(std::string(ops().name) == "avx2");
  }
  force_backend(initial);
}
