#pragma once
// One-euro adaptive low-pass filter for keypoint streams: cutoff frequency
// rises with signal speed, trading jitter suppression against lag.

#include <array>
#include <stdexcept>
#include <vector>

#include "wpose/skeleton.hpp"

namespace wpose {

struct NonMonotonicTime : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OneEuroConfig {
  double fc_min = 1.5;    // Hz
  double beta = 0.15;     // cutoff slope per unit speed
  double d_cutoff = 1.0;  // Hz, derivative low-pass
  double reset_gap = 0.5; // seconds without samples before a channel resets

  void validate() const;
};

// alpha(fc, dt) = 1 / (1 + tau/dt), tau = 1 / (2 pi fc)
double one_euro_alpha(double cutoff_hz, double dt);

class OneEuroChannel {
 public:
  double step(double value, double t, const OneEuroConfig& cfg);
  void reset() { initialized_ = false; }
  bool initialized() const { return initialized_; }

 private:
  bool initialized_ = false;
  double x_ = 0;   // last filtered value
  double dx_ = 0;  // last filtered derivative
  double t_ = 0;   // last timestamp
};

// 17 x 3 independent channels driven by Skeleton3D timestamps.
class SkeletonFilter {
 public:
  explicit SkeletonFilter(OneEuroConfig cfg = {});
  Skeleton3D filter(const Skeleton3D& in);
  void reset();
  const OneEuroConfig& config() const { return cfg_; }

 private:
  OneEuroConfig cfg_;
  std::array<OneEuroChannel, kKeypointCount * 3> channels_;
};

// Optional pre-lifting smoothing of 2D detections (u, v channels only).
class Skeleton2DFilter {
 public:
  explicit Skeleton2DFilter(OneEuroConfig cfg = {});
  Skeleton2D filter(const Skeleton2D& in);
  void reset();

 private:
  OneEuroConfig cfg_;
  std::array<OneEuroChannel, kKeypointCount * 2> channels_;
};

std::vector<Skeleton3D> filter_sequence(const std::vector<Skeleton3D>& seq,
                                        const OneEuroConfig& cfg = {});

}  // namespace wpose
