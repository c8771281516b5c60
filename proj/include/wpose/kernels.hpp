#pragma once
// Compute kernels behind the hot inner loops: one scalar reference
// implementation per entry point and an AVX2 variant selected at runtime.
// Every kernel keeps a fixed evaluation order, so repeated calls on the
// same backend are bit-identical. The scalar table is the semantic
// reference; the AVX2 table is equivalence-tested against it.

#include <cstddef>
#include <cstdint>

namespace wpose::kernels {

enum class Backend { scalar, avx2 };

struct Ops {
  const char* name;

  // double precision (model weights, geometry, reductions)
  double (*dot)(const double* a, const double* b, int n);
  // y[r] = dot(w[r,:], x), w row-major rows x cols
  void (*matvec)(const double* w, const double* x, double* y, int rows, int cols);
  // dx[c] += sum_r g[r] * w[r,c]
  void (*matvec_t_acc)(const double* w, const double* g, double* dx, int rows, int cols);
  // dw[r,c] += g[r] * x[c]
  void (*ger_acc)(double* dw, const double* g, const double* x, int rows, int cols);
  void (*axpy)(double a, const double* x, double* y, int n);
  double (*sum_sq)(const double* x, int n);
  void (*clip)(double* x, int n, double lo, double hi);
  // w -= lr * mhat / (sqrt(vhat) + eps) with mhat = m/corr1, vhat = v/corr2
  void (*adam_step)(double* w, double* m, double* v, const double* g, int n,
                    double lr, double beta1, double beta2, double corr1,
                    double corr2, double eps);

  // single precision (frames, heatmaps)
  // dst[i] = exp(-((i - x0)^2 + dy2) * inv_two_sigma_sq)
  void (*gaussian_row)(float* dst, int n, float x0, float dy2,
                       float inv_two_sigma_sq);
  // moments of max(v, 0) over a w x h map: mass, sum v*col, sum v*row, max raw
  void (*softargmax_sums)(const float* map, int w, int h, double* mass,
                          double* mu, double* mv, float* max_raw);
  // interleaved 8-bit RGB -> luminance in [0,1], weights 0.299/0.587/0.114
  void (*rgb_to_gray_unit)(const std::uint8_t* rgb, float* gray, int npx);
  // out[i] = min(mm[i] * scale, 1.0f); scale = 1 / depth_max_mm
  void (*depth_mm_to_unit)(const std::uint16_t* mm, float* out, int n,
                           float scale);
  void (*saxpy)(float a, const float* x, float* y, int n);
  double (*mse)(const float* a, const float* b, std::size_t n);
};

// Active table. Default selection: AVX2 when the build and the CPU support
// it, unless the WPOSE_KERNELS env var ("scalar" or "avx2") says otherwise.
const Ops& ops();
Backend active_backend();
bool backend_available(Backend b);
void force_backend(Backend b);  // throws std::runtime_error if unavailable

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in

}  // namespace wpose::kernels
