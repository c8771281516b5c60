#include "wpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "wpose/geometry.hpp"

namespace wpose::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    std::ostringstream msg;
    msg << "sequence lengths differ: " << a << " vs " << b;
    throw LengthMismatch(msg.str());
  }
  if (a == 0) throw LengthMismatch("empty sequences");
}

MeanSE mean_se(const std::vector<double>& xs) {
  MeanSE out;
  if (xs.empty()) return out;
  double sum = 0;
  for (double x : xs) sum += x;
  out.mean = sum / double(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  const double std_pop = std::sqrt(ss / double(xs.size()));
  out.se = std_pop / std::sqrt(double(xs.size()));
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0;
  const double pos = p * double(sorted.size() - 1);
  const std::size_t lo = std::size_t(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

BoxStats box_stats(std::vector<double> xs) {
  BoxStats out;
  if (xs.empty()) return out;
  std::sort(xs.begin(), xs.end());
  out.median = quantile_sorted(xs, 0.5);
  out.q1 = quantile_sorted(xs, 0.25);
  out.q3 = quantile_sorted(xs, 0.75);
  const double iqr = out.q3 - out.q1;
  const double lo_fence = out.q1 - 1.5 * iqr;
  const double hi_fence = out.q3 + 1.5 * iqr;
  out.lo_whisker = xs.front();
  out.hi_whisker = xs.back();
  for (double x : xs)
    if (x >= lo_fence) {
      out.lo_whisker = x;
      break;
    }
  for (auto it = xs.rbegin(); it != xs.rend(); ++it)
    if (*it <= hi_fence) {
      out.hi_whisker = *it;
      break;
    }
  return out;
}

// Per-(frame, joint) Euclidean errors in meters under the alignment.
std::vector<std::array<double, kKeypointCount>> errors_3d(
    const std::vector<Skeleton3D>& pred, const std::vector<Skeleton3D>& gt,
    const Topology& topo, Alignment alignment) {
  check_lengths(pred.size(), gt.size());
  std::vector<std::array<double, kKeypointCount>> out(pred.size());
  for (std::size_t f = 0; f < pred.size(); ++f) {
    Vec3 dp = Vec3::Zero(), dg = Vec3::Zero();
    if (alignment == Alignment::root) {
      dp = pred[f].coords[topo.root_index];
      dg = gt[f].coords[topo.root_index];
    }
    for (int k = 0; k < kKeypointCount; ++k)
      out[f][k] = ((pred[f].coords[k] - dp) - (gt[f].coords[k] - dg)).norm();
  }
  return out;
}

std::vector<std::array<double, kKeypointCount>> errors_pa(
    const std::vector<Skeleton3D>& pred, const std::vector<Skeleton3D>& gt) {
  check_lengths(pred.size(), gt.size());
  std::vector<std::array<double, kKeypointCount>> out(pred.size());
  std::vector<Vec3> src(kKeypointCount), dst(kKeypointCount);
  for (std::size_t f = 0; f < pred.size(); ++f) {
    for (int k = 0; k < kKeypointCount; ++k) {
      src[k] = pred[f].coords[k];
      dst[k] = gt[f].coords[k];
    }
    const RigidTransform t = procrustes_fit(src, dst, /*with_scale=*/true);
    for (int k = 0; k < kKeypointCount; ++k)
      out[f][k] = (apply_transform(t, src[k]) - dst[k]).norm();
  }
  return out;
}

double mean_of(const std::vector<std::array<double, kKeypointCount>>& errs) {
  double sum = 0;
  for (const auto& frame : errs)
    for (double e : frame) sum += e;
  return sum / (double(errs.size()) * kKeypointCount);
}

std::vector<double> flatten(const std::vector<std::array<double, kKeypointCount>>& errs,
                            double unit) {
  std::vector<double> out;
  out.reserve(errs.size() * kKeypointCount);
  for (const auto& frame : errs)
    for (double e : frame) out.push_back(e * unit);
  return out;
}

double pck_of(const std::vector<std::array<double, kKeypointCount>>& errs,
              double threshold) {
  std::size_t hits = 0;
  for (const auto& frame : errs)
    for (double e : frame)
      if (e <= threshold) ++hits;  // boundary counts as correct
  return 100.0 * double(hits) / (double(errs.size()) * kKeypointCount);
}

}  // namespace

double mpjpe_mm(const std::vector<Skeleton3D>& pred,
                const std::vector<Skeleton3D>& gt, const Topology& topo) {
  return 1000.0 * mean_of(errors_3d(pred, gt, topo, Alignment::root));
}

double pa_mpjpe_mm(const std::vector<Skeleton3D>& pred,
                   const std::vector<Skeleton3D>& gt) {
  return 1000.0 * mean_of(errors_pa(pred, gt));
}

double a_mpjpe_mm(const std::vector<Skeleton3D>& pred,
                  const std::vector<Skeleton3D>& gt) {
  return 1000.0 * mean_of(errors_3d(pred, gt, default_topology(), Alignment::none));
}

double mpjpe_2d_px(const std::vector<Skeleton2D>& pred,
                   const std::vector<Skeleton2D>& gt) {
  check_lengths(pred.size(), gt.size());
  double sum = 0;
  for (std::size_t f = 0; f < pred.size(); ++f)
    for (int k = 0; k < kKeypointCount; ++k)
      sum += (pred[f].coords[k] - gt[f].coords[k]).norm();
  return sum / (double(pred.size()) * kKeypointCount);
}

double pck_3d_pct(const std::vector<Skeleton3D>& pred,
                  const std::vector<Skeleton3D>& gt, const Topology& topo,
                  double threshold_mm, Alignment alignment) {
  if (!(threshold_mm > 0)) throw std::invalid_argument("pck: threshold must be > 0");
  return pck_of(errors_3d(pred, gt, topo, alignment), threshold_mm / 1000.0);
}

double pck_2d_pct(const std::vector<Skeleton2D>& pred,
                  const std::vector<Skeleton2D>& gt, double threshold_px) {
  if (!(threshold_px > 0)) throw std::invalid_argument("pck: threshold must be > 0");
  check_lengths(pred.size(), gt.size());
  std::size_t hits = 0;
  for (std::size_t f = 0; f < pred.size(); ++f)
    for (int k = 0; k < kKeypointCount; ++k)
      if ((pred[f].coords[k] - gt[f].coords[k]).norm() <= threshold_px) ++hits;
  return 100.0 * double(hits) / (double(pred.size()) * kKeypointCount);
}

MetricsReport evaluate_3d(const std::vector<Skeleton3D>& pred,
                          const std::vector<Skeleton3D>& gt,
                          const Topology& topo, double pck_threshold_mm) {
  MetricsReport rep;
  rep.has_3d = true;
  rep.n_frames = pred.size();
  rep.pck3d_threshold_mm = pck_threshold_mm;

  const auto root_errs = errors_3d(pred, gt, topo, Alignment::root);
  const auto abs_errs = errors_3d(pred, gt, topo, Alignment::none);
  const auto pa_errs = errors_pa(pred, gt);

  rep.mpjpe_mm = mean_se(flatten(root_errs, 1000.0));
  rep.a_mpjpe_mm = mean_se(flatten(abs_errs, 1000.0));
  rep.pa_mpjpe_mm = mean_se(flatten(pa_errs, 1000.0));
  rep.pck3d_pct = pck_of(root_errs, pck_threshold_mm / 1000.0);

  for (int k = 0; k < kKeypointCount; ++k) {
    std::vector<double> joint;
    joint.reserve(root_errs.size());
    for (const auto& frame : root_errs) joint.push_back(frame[k] * 1000.0);
    rep.per_joint[k] = box_stats(std::move(joint));
  }
  return rep;
}

MetricsReport evaluate_2d(const std::vector<Skeleton2D>& pred,
                          const std::vector<Skeleton2D>& gt,
                          double pck_threshold_px) {
  check_lengths(pred.size(), gt.size());
  MetricsReport rep;
  rep.has_2d = true;
  rep.n_frames = pred.size();
  rep.pck2d_threshold_px = pck_threshold_px;

  std::vector<double> all;
  all.reserve(pred.size() * kKeypointCount);
  std::array<std::vector<double>, kKeypointCount> per_joint;
  std::size_t hits = 0;
  for (std::size_t f = 0; f < pred.size(); ++f)
    for (int k = 0; k < kKeypointCount; ++k) {
      const double e = (pred[f].coords[k] - gt[f].coords[k]).norm();
      all.push_back(e);
      per_joint[k].push_back(e);
      if (e <= pck_threshold_px) ++hits;
    }
  rep.mpjpe_2d_px = mean_se(all);
  rep.pck2d_pct = 100.0 * double(hits) / double(all.size());
  for (int k = 0; k < kKeypointCount; ++k)
    rep.per_joint[k] = box_stats(std::move(per_joint[k]));
  return rep;
}

std::string to_text(const MetricsReport& rep, const Topology& topo) {
  char buf[160];
  std::ostringstream out;
  out << "frames: " << rep.n_frames << "\n";
  if (rep.has_3d) {
    std::snprintf(buf, sizeof(buf), "MPJPE    : %8.3f +/- %.3f mm\n",
                  rep.mpjpe_mm.mean, rep.mpjpe_mm.se);
    out << buf;
    std::snprintf(buf, sizeof(buf), "PA_MPJPE : %8.3f +/- %.3f mm\n",
                  rep.pa_mpjpe_mm.mean, rep.pa_mpjpe_mm.se);
    out << buf;
    std::snprintf(buf, sizeof(buf), "A_MPJPE  : %8.3f +/- %.3f mm\n",
                  rep.a_mpjpe_mm.mean, rep.a_mpjpe_mm.se);
    out << buf;
    std::snprintf(buf, sizeof(buf), "PCK@%gmm : %7.2f %%\n",
                  rep.pck3d_threshold_mm, rep.pck3d_pct);
    out << buf;
  }
  if (rep.has_2d) {
    std::snprintf(buf, sizeof(buf), "MPJPE_2D : %8.3f +/- %.3f px\n",
                  rep.mpjpe_2d_px.mean, rep.mpjpe_2d_px.se);
    out << buf;
    std::snprintf(buf, sizeof(buf), "PCK@%gpx : %7.2f %%\n",
                  rep.pck2d_threshold_px, rep.pck2d_pct);
    out << buf;
  }
  out << per_joint_table(rep, topo);
  return out.str();
}

std::string per_joint_table(const MetricsReport& rep, const Topology& topo) {
  std::ostringstream out;
  out << "# joint median q1 q3 lo_whisker hi_whisker\n";
  char buf[160];
  for (int k = 0; k < kKeypointCount; ++k) {
    const BoxStats& b = rep.per_joint[k];
    std::snprintf(buf, sizeof(buf), "%d %s %.6g %.6g %.6g %.6g %.6g\n", k,
                  topo.names[k].c_str(), b.median, b.q1, b.q3, b.lo_whisker,
                  b.hi_whisker);
    out << buf;
  }
  return out.str();
}

std::string to_json(const MetricsReport& rep, const Topology& topo) {
  nlohmann::json j;
  j["n_frames"] = rep.n_frames;
  j["interval"] = "standard_error";
  if (rep.has_3d) {
    j["mpjpe_mm"] = {{"mean", rep.mpjpe_mm.mean}, {"se", rep.mpjpe_mm.se}};
    j["pa_mpjpe_mm"] = {{"mean", rep.pa_mpjpe_mm.mean}, {"se", rep.pa_mpjpe_mm.se}};
    j["a_mpjpe_mm"] = {{"mean", rep.a_mpjpe_mm.mean}, {"se", rep.a_mpjpe_mm.se}};
    j["pck_3d"] = {{"threshold_mm", rep.pck3d_threshold_mm}, {"percent", rep.pck3d_pct}};
  }
  if (rep.has_2d) {
    j["mpjpe_2d_px"] = {{"mean", rep.mpjpe_2d_px.mean}, {"se", rep.mpjpe_2d_px.se}};
    j["pck_2d"] = {{"threshold_px", rep.pck2d_threshold_px}, {"percent", rep.pck2d_pct}};
  }
  nlohmann::json joints = nlohmann::json::array();
  for (int k = 0; k < kKeypointCount; ++k) {
    const BoxStats& b = rep.per_joint[k];
    joints.push_back({{"name", topo.names[k]},
                      {"median", b.median},
                      {"q1", b.q1},
                      {"q3", b.q3},
                      {"lo_whisker", b.lo_whisker},
                      {"hi_whisker", b.hi_whisker}});
  }
  j["per_joint"] = joints;
  return j.dump(2);
}

LatencyStats latency_stats(const std::vector<double>& samples_ms) {
  if (samples_ms.empty()) throw EmptySamples("latency_stats: no samples");
  LatencyStats out;
  out.n = samples_ms.size();
  double sum = 0;
  for (double x : samples_ms) sum += x;
  out.mean = sum / double(out.n);
  double ss = 0;
  for (double x : samples_ms) ss += (x - out.mean) * (x - out.mean);
  out.stddev = std::sqrt(ss / double(out.n));  // population estimator
  out.se = out.stddev / std::sqrt(double(out.n));
  std::vector<double> sorted = samples_ms;
  std::sort(sorted.begin(), sorted.end());
  out.p50 = quantile_sorted(sorted, 0.50);
  out.p95 = quantile_sorted(sorted, 0.95);
  return out;
}

}  // namespace wpose::metrics
