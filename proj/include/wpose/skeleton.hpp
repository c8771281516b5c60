#pragma once
// Keypoint topology and skeleton containers. The 17 keypoints follow a
// fixed canonical order (proximal before distal, left before right);
// the 16 connections form a tree rooted at the pelvis.

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/types.hpp"

namespace wpose {

struct WrongHalf : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SequenceIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CameraId { posture, gait };

enum Keypoint : int {
  kPelvis = 0,
  kSpineMid,
  kNeck,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftHeel,
  kRightHeel,
  kLeftToe,
  kRightToe,
};

struct Topology {
  std::string name;
  std::array<std::string, kKeypointCount> names;
  std::array<std::pair<int, int>, kConnectionCount> connections;
  int root_index = kPelvis;
  std::array<CameraId, kKeypointCount> camera_assignment;

  void validate() const;  // throws std::invalid_argument on a broken table
  std::vector<int> neighbors(int keypoint) const;
};

// Torso and arms on the posture camera, hips down on the gait camera.
const Topology& default_topology();

// 2D pose in concatenated-frame pixels (posture stacked above gait).
struct Skeleton2D {
  std::array<Vec2, kKeypointCount> coords;
  std::array<double, kKeypointCount> confidence{};   // [0,1]
  std::array<double, kKeypointCount> depth_at_kp{};  // meters, 0 = dead pixel
  double timestamp = 0.0;                            // seconds
};

// 3D pose in posture-camera metric space.
struct Skeleton3D {
  std::array<Vec3, kKeypointCount> coords;
  double timestamp = 0.0;  // seconds
};

Skeleton3D root_relative(const Skeleton3D& skel, const Topology& topo);

struct CameraCoord {
  CameraId camera;
  Vec2 pixel;
};

// Concatenated-frame coordinate -> per-camera coordinate and back.
// cam_height is the per-camera frame height in pixels.
std::array<CameraCoord, kKeypointCount> split_concat_coords(
    const Skeleton2D& skel, const Topology& topo, double cam_height);
Vec2 to_concat_coords(const CameraCoord& c, double cam_height);

std::array<double, kConnectionCount> limb_lengths(const Skeleton3D& skel,
                                                  const Topology& topo);

// Sequence files: one header line (topology name + column schema), then
// CSV records, numbers printed with 9 significant digits. Writing what
// was read reproduces the bytes exactly.
void write_sequence_3d(std::ostream& out, const std::vector<Skeleton3D>& seq,
                       const Topology& topo);
std::vector<Skeleton3D> read_sequence_3d(std::istream& in);
void write_sequence_2d(std::ostream& out, const std::vector<Skeleton2D>& seq,
                       const Topology& topo);
std::vector<Skeleton2D> read_sequence_2d(std::istream& in);

void save_sequence_3d(const std::vector<Skeleton3D>& seq, const std::string& path,
                      const Topology& topo = default_topology());
std::vector<Skeleton3D> load_sequence_3d(const std::string& path);
void save_sequence_2d(const std::vector<Skeleton2D>& seq, const std::string& path,
                      const Topology& topo = default_topology());
std::vector<Skeleton2D> load_sequence_2d(const std::string& path);

// Incremental wire-format reading for streaming consumers (pipes).
// read_2d_header consumes and validates the header line; read_2d_record
// returns false at end of stream.
void read_2d_header(std::istream& in);
bool read_2d_record(std::istream& in, Skeleton2D& out);

// Incremental writing for streaming producers.
void write_3d_header(std::ostream& out, const Topology& topo);
void write_3d_record(std::ostream& out, const Skeleton3D& skel);

}  // namespace wpose
