#include "wpose/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace wpose::kernels {

namespace {

double dot_scalar(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void matvec_scalar(const double* w, const double* x, double* y, int rows,
                   int cols) {
  for (int r = 0; r < rows; ++r) y[r] = dot_scalar(w + std::size_t(r) * cols, x, cols);
}

void matvec_t_acc_scalar(const double* w, const double* g, double* dx,
                         int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double gr = g[r];
    const double* wr = w + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) dx[c] += gr * wr[c];
  }
}

void ger_acc_scalar(double* dw, const double* g, const double* x, int rows,
                    int cols) {
  for (int r = 0; r < rows; ++r) {
    const double gr = g[r];
    double* wr = dw + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) wr[c] += gr * x[c];
  }
}

void axpy_scalar(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_sq_scalar(const double* x, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void clip_scalar(double* x, int n, double lo, double hi) {
  for (int i = 0; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void adam_step_scalar(double* w, double* m, double* v, const double* g, int n,
                      double lr, double beta1, double beta2, double corr1,
                      double corr2, double eps) {
  for (int i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void gaussian_row_scalar(float* dst, int n, float x0, float dy2,
                         float inv_two_sigma_sq) {
  for (int i = 0; i < n; ++i) {
    const float dx = float(i) - x0;
    dst[i] = std::exp(-(dx * dx + dy2) * inv_two_sigma_sq);
  }
}

void softargmax_sums_scalar(const float* map, int w, int h, double* mass,
                            double* mu, double* mv, float* max_raw) {
  double m00 = 0.0, m10 = 0.0, m01 = 0.0;
  float mx = map[0];
  for (int row = 0; row < h; ++row) {
    const float* p = map + std::size_t(row) * w;
    for (int col = 0; col < w; ++col) {
      const float raw = p[col];
      mx = std::max(mx, raw);
      const double val = raw > 0.0f ? double(raw) : 0.0;
      m00 += val;
      m10 += val * col;
      m01 += val * row;
    }
  }
  *mass = m00;
  *mu = m10;
  *mv = m01;
  *max_raw = mx;
}

void rgb_to_gray_unit_scalar(const std::uint8_t* rgb, float* gray, int npx) {
  constexpr float kR = 0.299f, kG = 0.587f, kB = 0.114f, kInv = 1.0f / 255.0f;
  for (int i = 0; i < npx; ++i) {
    const float r = rgb[3 * i + 0];
    const float g = rgb[3 * i + 1];
    const float b = rgb[3 * i + 2];
    gray[i] = (kR * r + kG * g + kB * b) * kInv;
  }
}

void depth_mm_to_unit_scalar(const std::uint16_t* mm, float* out, int n,
                             float scale) {
  for (int i = 0; i < n; ++i) out[i] = std::min(float(mm[i]) * scale, 1.0f);
}

void saxpy_scalar(float a, const float* x, float* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

double mse_scalar(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return n ? acc / double(n) : 0.0;
}

const Ops kScalarOps = {
    "scalar",
    dot_scalar,
    matvec_scalar,
    matvec_t_acc_scalar,
    ger_acc_scalar,
    axpy_scalar,
    sum_sq_scalar,
    clip_scalar,
    adam_step_scalar,
    gaussian_row_scalar,
    softargmax_sums_scalar,
    rgb_to_gray_unit_scalar,
    depth_mm_to_unit_scalar,
    saxpy_scalar,
    mse_scalar,
};

std::atomic<const Ops*> g_active{nullptr};

const Ops* pick_default() {
  if (const char* env = std::getenv("WPOSE_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &kScalarOps;
    if (want == "avx2") {
      if (const Ops* t = avx2_ops()) return t;
      throw std::runtime_error("WPOSE_KERNELS=avx2 but AVX2 is unavailable");
    }
    throw std::runtime_error("WPOSE_KERNELS: unknown backend '" + want + "'");
  }
  if (const Ops* t = avx2_ops()) return t;
  return &kScalarOps;
}

}  // namespace

const Ops& scalar_ops() { return kScalarOps; }

const Ops& ops() {
  const Ops* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = pick_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

Backend active_backend() {
  return &ops() == &kScalarOps ? Backend::scalar : Backend::avx2;
}

bool backend_available(Backend b) {
  return b == Backend::scalar || avx2_ops() != nullptr;
}

void force_backend(Backend b) {
  if (b == Backend::scalar) {
    g_active.store(&kScalarOps, std::memory_order_release);
    return;
  }
  const Ops* t = avx2_ops();
  if (!t) throw std::runtime_error("AVX2 kernels unavailable on this host");
  g_active.store(t, std::memory_order_release);
}

}  // namespace wpose::kernels
