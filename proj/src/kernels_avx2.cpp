// AVX2+FMA variants of the compute kernels. This translation unit is the
// only one built with -mavx2 -mfma; dispatch guards it behind a runtime
// CPU check, so nothing here may run on hosts without AVX2.

#include "wpose/kernels.hpp"

#ifdef __AVX2__

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace wpose::kernels {
namespace {

inline double hsum_pd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline float hmax_ps(__m128 v) {
  __m128 shuf = _mm_movehl_ps(v, v);
  v = _mm_max_ps(v, shuf);
  shuf = _mm_shuffle_ps(v, v, 0x55);
  v = _mm_max_ss(v, shuf);
  return _mm_cvtss_f32(v);
}

double dot_avx2(const double* a, const double* b, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum_pd(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void matvec_avx2(const double* w, const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) y[r] = dot_avx2(w + std::size_t(r) * cols, x, cols);
}

void axpy_avx2(double a, const double* x, double* y, int n) {
  const __m256d va = _mm256_set1_pd(a);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void matvec_t_acc_avx2(const double* w, const double* g, double* dx, int rows, int cols) {
  for (int r = 0; r < rows; ++r) axpy_avx2(g[r], w + std::size_t(r) * cols, dx, cols);
}

void ger_acc_avx2(double* dw, const double* g, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) axpy_avx2(g[r], x, dw + std::size_t(r) * cols, cols);
}

double sum_sq_avx2(const double* x, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void clip_avx2(double* x, int n, double lo, double hi) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    v = _mm256_min_pd(vhi, _mm256_max_pd(vlo, v));
    _mm256_storeu_pd(x + i, v);
  }
  for (; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void adam_step_avx2(double* w, double* m, double* v, const double* g, int n,
                    double lr, double beta1, double beta2, double corr1,
                    double corr2, double eps) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d vic1 = _mm256_set1_pd(1.0 / corr1);
  const __m256d vic2 = _mm256_set1_pd(1.0 / corr2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vb1c, vg));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(vm, vic1);
    const __m256d vhat = _mm256_mul_pd(vv, vic2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * (1.0 / corr1);
    const double vhat = v[i] * (1.0 / corr2);
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// Cephes-style single precision exp, |rel err| < 2 ulp on [-87, 88].
inline __m256 exp256_ps(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647950f);
  const __m256 lo = _mm256_set1_ps(-87.3365478515625f);
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 one = _mm256_set1_ps(1.0f);

  x = _mm256_max_ps(_mm256_min_ps(x, hi), lo);
  __m256 fx = _mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);

  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, _mm256_add_ps(x, one));

  __m256i imm = _mm256_cvttps_epi32(fx);
  imm = _mm256_add_epi32(imm, _mm256_set1_epi32(0x7f));
  imm = _mm256_slli_epi32(imm, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(imm));
}

void gaussian_row_avx2(float* dst, int n, float x0, float dy2,
                       float inv_two_sigma_sq) {
  const __m256 vx0 = _mm256_set1_ps(x0);
  const __m256 vdy2 = _mm256_set1_ps(dy2);
  const __m256 vc = _mm256_set1_ps(-inv_two_sigma_sq);
  const __m256 ramp = _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 idx = _mm256_add_ps(_mm256_set1_ps(float(i)), ramp);
    const __m256 dx = _mm256_sub_ps(idx, vx0);
    const __m256 arg = _mm256_mul_ps(_mm256_fmadd_ps(dx, dx, vdy2), vc);
    _mm256_storeu_ps(dst + i, exp256_ps(arg));
  }
  for (; i < n; ++i) {
    const float dx = float(i) - x0;
    dst[i] = std::exp(-(dx * dx + dy2) * inv_two_sigma_sq);
  }
}

void softargmax_sums_avx2(const float* map, int w, int h, double* mass,
                          double* mu, double* mv, float* max_raw) {
  __m256d m10 = _mm256_setzero_pd();
  __m128 mx = _mm_set1_ps(map[0]);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d ramp = _mm256_setr_pd(0, 1, 2, 3);
  double m00 = 0.0, m01 = 0.0, m10_tail = 0.0;
  for (int row = 0; row < h; ++row) {
    const float* p = map + std::size_t(row) * w;
    __m256d row_mass = _mm256_setzero_pd();
    int col = 0;
    for (; col + 4 <= w; col += 4) {
      const __m128 raw = _mm_loadu_ps(p + col);
      mx = _mm_max_ps(mx, raw);
      const __m256d v = _mm256_max_pd(_mm256_cvtps_pd(raw), zero);
      const __m256d idx = _mm256_add_pd(_mm256_set1_pd(double(col)), ramp);
      row_mass = _mm256_add_pd(row_mass, v);
      m10 = _mm256_fmadd_pd(v, idx, m10);
    }
    double rm = hsum_pd(row_mass);
    for (; col < w; ++col) {
      const float raw = p[col];
      mx = _mm_max_ss(mx, _mm_set_ss(raw));
      const double v = raw > 0.0f ? double(raw) : 0.0;
      rm += v;
      m10_tail += v * col;
    }
    m00 += rm;
    m01 += rm * row;
  }
  *mass = m00;
  *mu = hsum_pd(m10) + m10_tail;
  *mv = m01;
  *max_raw = hmax_ps(mx);
}

void rgb_to_gray_unit_avx2(const std::uint8_t* rgb, float* gray, int npx) {
  const __m256 wr = _mm256_set1_ps(0.299f / 255.0f);
  const __m256 wg = _mm256_set1_ps(0.587f / 255.0f);
  const __m256 wb = _mm256_set1_ps(0.114f / 255.0f);

  const __m128i mra = _mm_setr_epi8(0, 3, 6, 9, 12, 15, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1);
  const __m128i mrb = _mm_setr_epi8(-1, -1, -1, -1, -1, -1, 2, 5, 8, 11, 14, -1, -1, -1, -1, -1);
  const __m128i mrc = _mm_setr_epi8(-1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 1, 4, 7, 10, 13);
  const __m128i mga = _mm_setr_epi8(1, 4, 7, 10, 13, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1);
  const __m128i mgb = _mm_setr_epi8(-1, -1, -1, -1, -1, 0, 3, 6, 9, 12, 15, -1, -1, -1, -1, -1);
  const __m128i mgc = _mm_setr_epi8(-1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 2, 5, 8, 11, 14);
  const __m128i mba = _mm_setr_epi8(2, 5, 8, 11, 14, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1);
  const __m128i mbb = _mm_setr_epi8(-1, -1, -1, -1, -1, 1, 4, 7, 10, 13, -1, -1, -1, -1, -1, -1);
  const __m128i mbc = _mm_setr_epi8(-1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 0, 3, 6, 9, 12, 15);

  auto weighted = [&](__m128i plane16, const __m256& wgt, __m256& acc_lo, __m256& acc_hi) {
    const __m256i lo = _mm256_cvtepu8_epi32(plane16);
    const __m256i hi = _mm256_cvtepu8_epi32(_mm_unpackhi_epi64(plane16, plane16));
    acc_lo = _mm256_fmadd_ps(_mm256_cvtepi32_ps(lo), wgt, acc_lo);
    acc_hi = _mm256_fmadd_ps(_mm256_cvtepi32_ps(hi), wgt, acc_hi);
  };

  int i = 0;
  for (; i + 16 <= npx; i += 16) {
    const std::uint8_t* src = rgb + 3 * std::size_t(i);
    const __m128i a = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src));
    const __m128i b = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src + 16));
    const __m128i c = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src + 32));

    const __m128i r16 = _mm_or_si128(_mm_or_si128(_mm_shuffle_epi8(a, mra), _mm_shuffle_epi8(b, mrb)), _mm_shuffle_epi8(c, mrc));
    const __m128i g16 = _mm_or_si128(_mm_or_si128(_mm_shuffle_epi8(a, mga), _mm_shuffle_epi8(b, mgb)), _mm_shuffle_epi8(c, mgc));
    const __m128i b16 = _mm_or_si128(_mm_or_si128(_mm_shuffle_epi8(a, mba), _mm_shuffle_epi8(b, mbb)), _mm_shuffle_epi8(c, mbc));

    __m256 lo = _mm256_setzero_ps();
    __m256 hi = _mm256_setzero_ps();
    weighted(r16, wr, lo, hi);
    weighted(g16, wg, lo, hi);
    weighted(b16, wb, lo, hi);
    _mm256_storeu_ps(gray + i, lo);
    _mm256_storeu_ps(gray + i + 8, hi);
  }
  for (; i < npx; ++i) {
    const float r = rgb[3 * i + 0];
    const float g = rgb[3 * i + 1];
    const float b = rgb[3 * i + 2];
    gray[i] = (0.299f / 255.0f) * r + (0.587f / 255.0f) * g + (0.114f / 255.0f) * b;
  }
}

void depth_mm_to_unit_avx2(const std::uint16_t* mm, float* out, int n, float scale) {
  const __m256 vs = _mm256_set1_ps(scale);
  const __m256 one = _mm256_set1_ps(1.0f);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m128i raw = _mm_loadu_si128(reinterpret_cast<const __m128i*>(mm + i));
    const __m256 v = _mm256_cvtepi32_ps(_mm256_cvtepu16_epi32(raw));
    _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_mul_ps(v, vs), one));
  }
  for (; i < n; ++i) out[i] = std::min(float(mm[i]) * scale, 1.0f);
}

void saxpy_avx2(float a, const float* x, float* y, int n) {
  const __m256 va = _mm256_set1_ps(a);
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double mse_avx2(const float* a, const float* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    const __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
    const __m256d d = _mm256_sub_pd(va, vb);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum_pd(acc);
  for (; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return n ? s / double(n) : 0.0;
}

const Ops kAvx2Ops = {
    "avx2",
    dot_avx2,
    matvec_avx2,
    matvec_t_acc_avx2,
    ger_acc_avx2,
    axpy_avx2,
    sum_sq_avx2,
    clip_avx2,
    adam_step_avx2,
    gaussian_row_avx2,
    softargmax_sums_avx2,
    rgb_to_gray_unit_avx2,
    depth_mm_to_unit_avx2,
    saxpy_avx2,
    mse_avx2,
};

}  // namespace

const Ops* avx2_ops() {
  static const bool ok =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &kAvx2Ops : nullptr;
}

}  // namespace wpose::kernels

#else  // !__AVX2__

namespace wpose::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace wpose::kernels

#endif
