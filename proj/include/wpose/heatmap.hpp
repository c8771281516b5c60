#pragma once
// Gaussian keypoint / connection heatmap encoding and soft-argmax
// decoding. Maps are row-major float planes with values in [0,1];
// coordinates are map-resolution pixels.

#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/skeleton.hpp"
#include "wpose/types.hpp"

namespace wpose {

struct EmptyMap : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HeatmapStack {
  int width = 0, height = 0;
  double sigma = 0;
  std::vector<float> keypoint_maps;    // kKeypointCount * height * width
  std::vector<float> connection_maps;  // kConnectionCount * height * width

  float* keypoint_map(int k) { return keypoint_maps.data() + std::size_t(k) * height * width; }
  const float* keypoint_map(int k) const { return keypoint_maps.data() + std::size_t(k) * height * width; }
  float* connection_map(int c) { return connection_maps.data() + std::size_t(c) * height * width; }
  const float* connection_map(int c) const { return connection_maps.data() + std::size_t(c) * height * width; }
};

// Unit-peak Gaussian bump at each keypoint, truncated at 4 sigma.
// Keypoints outside [0,W)x[0,H) yield an all-zero map.
HeatmapStack encode_keypoint_maps(const Skeleton2D& skel_at_map_res,
                                  double sigma, int width, int height,
                                  int n_threads = 1);

// 1D Gaussian profile over the distance to the closed segment between the
// two connected keypoints; fills stack.connection_maps.
void encode_connection_maps(HeatmapStack& stack, const Skeleton2D& skel_at_map_res,
                            const Topology& topo, int n_threads = 1);

struct Decoded2D {
  double u = 0, v = 0;
  double confidence = 0;  // max raw value clamped to [0,1]
};

// Expectation of pixel coordinates under the sum-normalized map with
// negatives clamped to zero. Throws EmptyMap when nothing is positive.
Decoded2D soft_argmax(const float* map, int width, int height);

struct PixelIndex {
  int u = 0, v = 0;
};

// Testing oracle: location of the maximum, row-major first on ties.
PixelIndex hard_argmax(const float* map, int width, int height);

// Mean absolute coordinate error over 17 x 2 values.
double integral_loss(const Skeleton2D& pred, const Skeleton2D& gt);
// Mean squared error over all 33 maps.
double heatmap_mse(const HeatmapStack& pred, const HeatmapStack& gt);

// Flat binary dump: header {magic, K, C, H, W} as uint32 LE, then the
// keypoint and connection planes as float32 LE in declared order.
void save_heatmap_dump(const HeatmapStack& stack, const std::string& path);
HeatmapStack load_heatmap_dump(const std::string& path);

}  // namespace wpose
