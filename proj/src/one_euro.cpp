#include "wpose/one_euro.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace wpose {

void OneEuroConfig::validate() const {
  if (!(fc_min > 0)) throw std::invalid_argument("one-euro: fc_min must be > 0");
  if (!(beta >= 0)) throw std::invalid_argument("one-euro: beta must be >= 0");
  if (!(d_cutoff > 0)) throw std::invalid_argument("one-euro: d_cutoff must be > 0");
}

double one_euro_alpha(double cutoff_hz, double dt) {
  const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
  return 1.0 / (1.0 + tau / dt);
}

double OneEuroChannel::step(double value, double t, const OneEuroConfig& cfg) {
  if (!initialized_) {
    initialized_ = true;
    x_ = value;
    dx_ = 0;
    t_ = t;
    return value;
  }
  if (!(t > t_)) {
    std::ostringstream msg;
    msg << "one-euro: timestamp " << t << " not after " << t_;
    throw NonMonotonicTime(msg.str());
  }
  const double dt = t - t_;
  if (dt > cfg.reset_gap) {  // stream gap: restart instead of a derivative spike
    x_ = value;
    dx_ = 0;
    t_ = t;
    return value;
  }
  const double raw_dx = (value - x_) / dt;
  const double ad = one_euro_alpha(cfg.d_cutoff, dt);
  dx_ = ad * raw_dx + (1.0 - ad) * dx_;
  const double fc = cfg.fc_min + cfg.beta * std::abs(dx_);
  const double a = one_euro_alpha(fc, dt);
  x_ = a * value + (1.0 - a) * x_;
  t_ = t;
  return x_;
}

SkeletonFilter::SkeletonFilter(OneEuroConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Skeleton3D SkeletonFilter::filter(const Skeleton3D& in) {
  Skeleton3D out = in;
  for (int k = 0; k < kKeypointCount; ++k)
    for (int axis = 0; axis < 3; ++axis)
      out.coords[k](axis) =
          channels_[std::size_t(k) * 3 + axis].step(in.coords[k](axis), in.timestamp, cfg_);
  return out;
}

void SkeletonFilter::reset() {
  for (auto& ch : channels_) ch.reset();
}

Skeleton2DFilter::Skeleton2DFilter(OneEuroConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Skeleton2D Skeleton2DFilter::filter(const Skeleton2D& in) {
  Skeleton2D out = in;
  for (int k = 0; k < kKeypointCount; ++k)
    for (int axis = 0; axis < 2; ++axis)
      out.coords[k](axis) =
          channels_[std::size_t(k) * 2 + axis].step(in.coords[k](axis), in.timestamp, cfg_);
  return out;
}

void Skeleton2DFilter::reset() {
  for (auto& ch : channels_) ch.reset();
}

std::vector<Skeleton3D> filter_sequence(const std::vector<Skeleton3D>& seq,
                                        const OneEuroConfig& cfg) {
  SkeletonFilter filter(cfg);
  std::vector<Skeleton3D> out;
  out.reserve(seq.size());
  for (const Skeleton3D& s : seq) out.push_back(filter.filter(s));
  return out;
}

}  // namespace wpose
