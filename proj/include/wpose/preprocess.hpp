#pragma once
// Frame normalization and concatenation exactly as fed to the model:
// grayscale + [0,1] depth, posture stacked above gait, area resize for
// the gray plane and nearest-neighbor for depth.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/types.hpp"

namespace wpose {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySequence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kCamWidth = 640;
inline constexpr int kCamHeight = 480;
inline constexpr int kConcatHeight = 2 * kCamHeight;
inline constexpr int kModelWidth = 128;
inline constexpr int kModelHeight = 224;

// One synchronized group of four frames. RGB is interleaved 8-bit,
// depth is 16-bit millimeters; both 640x480.
struct FramePair {
  std::vector<std::uint8_t> posture_rgb;
  std::vector<std::uint16_t> posture_depth;
  std::vector<std::uint8_t> gait_rgb;
  std::vector<std::uint16_t> gait_depth;
  double timestamp = 0.0;  // seconds

  static FramePair blank(double timestamp = 0.0);
};

struct ModelInput {
  int width = 0, height = 0;
  std::vector<float> gray;   // height*width, [0,1]
  std::vector<float> depth;  // height*width, [0,1], 0 = dead pixel
  double timestamp = 0.0;
};

ModelInput preprocess(const FramePair& fp, int target_w = kModelWidth,
                      int target_h = kModelHeight, double depth_max = 10.0);

// Indices of the frames nearest each target-period tick, strictly
// increasing, duplicates dropped.
std::vector<std::size_t> downsample_sequence(const std::vector<double>& timestamps,
                                             double source_hz, double target_hz);

// Concatenated-camera-resolution pixel <-> model-resolution pixel.
Vec2 coord_rescale(const Vec2& px, int target_w, int target_h,
                   int src_w = kCamWidth, int src_h = kConcatHeight);
Vec2 coord_rescale_inverse(const Vec2& px, int target_w, int target_h,
                           int src_w = kCamWidth, int src_h = kConcatHeight);

// Exact-footprint area average, the reference resize for the gray plane.
void area_resize(const float* src, int src_w, int src_h, float* dst,
                 int dst_w, int dst_h);
void nearest_resize(const float* src, int src_w, int src_h, float* dst,
                    int dst_w, int dst_h);

// Frame sequence directory: <index>_{pgray|pdepth|ggray|gdepth}.bin blobs
// (8-bit gray, 16-bit LE millimeter depth, 640x480) plus timestamps.csv
// with "index,seconds" lines.
class FrameDirSource {
 public:
  explicit FrameDirSource(const std::string& dir);
  std::size_t size() const { return timestamps_.size(); }
  FramePair frame(std::size_t i) const;
  const std::vector<double>& timestamps() const { return timestamps_; }

 private:
  std::string dir_;
  std::vector<double> timestamps_;
};

void write_frame_dir(const std::string& dir, const std::vector<FramePair>& frames);

}  // namespace wpose
