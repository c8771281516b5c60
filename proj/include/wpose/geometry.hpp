#pragma once
// Pinhole camera model, SE(3)+scale transforms, skeleton-to-camera
// alignment and Procrustes fitting. All functions are pure; coordinates
// are meters, pixels are image coordinates with +x right, +y down and
// +z pointing away from the camera.

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/types.hpp"

namespace wpose {

struct NonPositiveDepth : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidDepth : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSkeleton : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;    // focal lengths, pixels
  double cx = 0, cy = 0;    // principal point, pixels
  int width = 0, height = 0;
  double depth_min = 0;     // meters
  double depth_max = 0;     // meters

  void validate(const std::string& label = "camera") const;
};

// p' = scale * rotation * p + translation. scale == 1 for rigid motion.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  void validate(const std::string& label = "transform") const;
  static RigidTransform identity() { return {}; }
};

struct CameraRig {
  CameraIntrinsics posture;
  CameraIntrinsics gait;
  RigidTransform gait_to_posture;  // scale must be 1

  void validate() const;
};

Vec2 project(const Vec3& point, const CameraIntrinsics& cam);
Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& cam);
bool in_frame(const Vec2& pixel, const CameraIntrinsics& cam);

Vec3 apply_transform(const RigidTransform& t, const Vec3& point);
// compose(a, b) applies b first: result(p) = a(b(p))
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

// Similarity fit source -> target in the least-squares sense. N >= 3 and
// the source cloud must span at least a plane. with_scale=false holds
// scale at 1 for rigid-only diagnostics.
RigidTransform procrustes_fit(const std::vector<Vec3>& source,
                              const std::vector<Vec3>& target,
                              bool with_scale = true);

enum class CenteringAnchor { centroid, root };

// Forward declared here; defined in skeleton.hpp.
struct Skeleton3D;
struct Topology;

// World-frame skeleton -> posture-camera frame: subtract the centering
// anchor, rotate by the IMU orientation, then translate so the wrist
// midpoint lands on the handle midpoint.
Skeleton3D align_skeleton_to_camera(const Skeleton3D& skel,
                                    const Mat3& imu_orientation,
                                    const std::array<Vec3, 2>& handle_offsets,
                                    const Topology& topo,
                                    CenteringAnchor anchor = CenteringAnchor::centroid);

// Calibration file: JSON with "posture", "gait" and "gait_to_posture".
// Distortion fields are rejected, not ignored.
CameraRig load_calibration(const std::string& path);
void save_calibration(const CameraRig& rig, const std::string& path);

}  // namespace wpose
