#pragma once
// Evaluation suite: the MPJPE family, PCK and latency accounting.
// 3D errors are reported in millimeters, 2D errors in pixels. The
// "+/-" intervals are standard errors (std / sqrt(n), population std).

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/skeleton.hpp"

namespace wpose::metrics {

struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Alignment { root, none };

struct MeanSE {
  double mean = 0;
  double se = 0;
};

// Pelvis-aligned mean per-joint position error, millimeters.
double mpjpe_mm(const std::vector<Skeleton3D>& pred,
                const std::vector<Skeleton3D>& gt, const Topology& topo);
// Per-frame Procrustes alignment of pred onto gt first.
double pa_mpjpe_mm(const std::vector<Skeleton3D>& pred,
                   const std::vector<Skeleton3D>& gt);
// No alignment.
double a_mpjpe_mm(const std::vector<Skeleton3D>& pred,
                  const std::vector<Skeleton3D>& gt);
double mpjpe_2d_px(const std::vector<Skeleton2D>& pred,
                   const std::vector<Skeleton2D>& gt);

// Percent of (frame, joint) pairs with error <= threshold (inclusive).
double pck_3d_pct(const std::vector<Skeleton3D>& pred,
                  const std::vector<Skeleton3D>& gt, const Topology& topo,
                  double threshold_mm, Alignment alignment = Alignment::root);
double pck_2d_pct(const std::vector<Skeleton2D>& pred,
                  const std::vector<Skeleton2D>& gt, double threshold_px);

struct BoxStats {
  double median = 0, q1 = 0, q3 = 0;
  double lo_whisker = 0, hi_whisker = 0;  // Tukey 1.5 IQR fences, clamped to data
};

struct MetricsReport {
  bool has_3d = false, has_2d = false;
  MeanSE mpjpe_mm, pa_mpjpe_mm, a_mpjpe_mm;
  double pck3d_pct = 0, pck3d_threshold_mm = 75;
  MeanSE mpjpe_2d_px;
  double pck2d_pct = 0, pck2d_threshold_px = 6;
  std::array<BoxStats, kKeypointCount> per_joint;  // mm (3D) or px (2D)
  std::size_t n_frames = 0;
};

MetricsReport evaluate_3d(const std::vector<Skeleton3D>& pred,
                          const std::vector<Skeleton3D>& gt,
                          const Topology& topo, double pck_threshold_mm = 75);
MetricsReport evaluate_2d(const std::vector<Skeleton2D>& pred,
                          const std::vector<Skeleton2D>& gt,
                          double pck_threshold_px = 6);

std::string to_text(const MetricsReport& report, const Topology& topo);
std::string to_json(const MetricsReport& report, const Topology& topo);
// Gnuplot-compatible per-joint table: index, name, median, q1, q3, whiskers.
std::string per_joint_table(const MetricsReport& report, const Topology& topo);

struct LatencyStats {
  double mean = 0, stddev = 0, se = 0;
  double p50 = 0, p95 = 0;
  std::size_t n = 0;
};

LatencyStats latency_stats(const std::vector<double>& samples_ms);

}  // namespace wpose::metrics
