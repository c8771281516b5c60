#pragma once
// Synthetic gait generator and dual-camera observation renderer. The
// kinematic model is deliberately simple (sinusoidal swing plus vertical
// bob, wrists pinned to the walker handles by two-link IK): it exists to
// exercise the geometry, lifting and filtering code paths with exact
// ground truth, not to be biomechanically faithful. Do not read results
// produced from it as clinical.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/geometry.hpp"
#include "wpose/lifter.hpp"
#include "wpose/preprocess.hpp"
#include "wpose/skeleton.hpp"

namespace wpose::synth {

struct OutOfFrustum : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoiseModel {
  double pixel_sigma_px = 0;
  double depth_sigma_m = 0;
  double dead_pixel_rate = 0;  // [0,1]
  double occlusion_rate = 0;   // [0,1]
  bool body_thickness = false; // per-subject constant depth offsets

  static NoiseModel clean() { return {}; }
  static NoiseModel paper_like() { return {2.0, 0.02, 0.2, 0.02, true}; }
};

struct GaitParams {
  std::array<double, kConnectionCount> segment_lengths{};  // meters
  double speed_mps = 0.5;   // one of {0.3, 0.5, 0.7}
  double cadence_hz = 1.4;  // leg swing frequency
  std::array<Vec3, 2> handles;  // left/right wrist anchors, posture frame
  NoiseModel noise;
  double duration_s = 10.0;
  double rate_hz = 30.0;  // >= 19
  double sway_phase = 0;  // walking-course flavour (forward / corner left / right)
  std::uint64_t seed = 0;

  void validate() const;
};

// Segment lengths for a subject of the given stature scale, with seeded
// per-segment jitter. The default handle positions stay reachable for
// scales in [0.88, 1.12].
std::array<double, kConnectionCount> anthropometry(double scale, std::uint64_t seed);
std::array<Vec3, 2> default_handles();
GaitParams default_params(double scale, double speed, std::uint64_t seed);

struct Observation {
  CameraId camera = CameraId::posture;
  Vec2 pixel{0, 0};       // per-camera pixel coordinates
  double depth_m = 0;     // noisy depth, 0 = dead pixel
  bool occluded = false;
};

struct SyntheticSequence {
  GaitParams params;
  std::vector<Skeleton3D> gt;  // posture-camera frame
  std::vector<std::array<Observation, kKeypointCount>> observations;
  std::array<double, kKeypointCount> body_offset_m{};  // applied depth offsets
};

SyntheticSequence generate_sequence(const GaitParams& params);

// Per-keypoint constant depth offsets standing in for body thickness,
// sign and magnitude (10..40 mm) drawn once per subject.
std::array<double, kKeypointCount> draw_body_offsets(std::uint64_t subject_seed);

// Projects every GT keypoint through its assigned camera and applies the
// noise model plus seq.body_offset_m (zeros when unset). Throws
// OutOfFrustum (with keypoint and frame) if a GT point leaves its
// camera's view.
void render_observations(SyntheticSequence& seq, const CameraRig& rig,
                         const NoiseModel& noise, std::uint64_t seed);

// Reference detector: repackages observations into concatenated-frame
// coordinates. Occluded keypoints keep their last visible coordinates
// with confidence 0.
std::vector<Skeleton2D> synthetic_detector(const SyntheticSequence& seq,
                                           const CameraRig& rig);

// Sprite rendering for runtime benchmarks: flat background with filled
// discs at the observed keypoints, depth discs carry the observed depth.
FramePair render_frame_pair(const SyntheticSequence& seq, std::size_t frame,
                            const CameraRig& rig);

// Plausible walker rig: posture camera at chest height, gait camera near
// the floor pitched down at the feet. Invented geometry, not from any
// measured equipment.
CameraRig default_rig();

struct Subject {
  int id = 0;
  double scale = 1.0;
  std::string split;  // train / val / test
  std::uint64_t seed = 0;
};

struct Trial {
  int subject = 0;
  double speed = 0;
  int repeat = 0;
  SyntheticSequence seq;
  std::vector<Skeleton2D> detections;
};

struct Dataset {
  CameraRig rig;
  std::vector<Subject> subjects;
  std::vector<Trial> trials;
};

struct DatasetSpec {
  int n_train = 6, n_val = 2, n_test = 2;
  std::vector<double> speeds = {0.3, 0.5, 0.7};
  int repeats = 3;
  double duration_s = 37.0;
  double rate_hz = 30.0;
  NoiseModel noise = NoiseModel::paper_like();
  std::uint64_t seed = 1;
};

Dataset generate_dataset(const DatasetSpec& spec);

// Writes calibration.json, manifest.json and per-trial sequence files
// (GT 3D + detected 2D) under dir.
void save_dataset(const Dataset& ds, const std::string& dir);
// Reads the files back; trials carry GT and detections (no observations).
Dataset load_dataset(const std::string& dir);

// Lifting samples for one split, downsampled from the capture rate to
// target_hz (the training rate).
std::vector<LiftSample> build_lift_samples(const Dataset& ds,
                                           const std::string& split,
                                           LifterVariant variant,
                                           double target_hz = 10.0);

}  // namespace wpose::synth
