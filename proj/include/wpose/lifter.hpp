#pragma once
// 2D -> 3D lifting: a residual dense network trained in-repo, plus the
// no-depth baseline and the explicit projection + residual correction
// variant. Weights are double precision; training is deterministic for
// a fixed seed and dataset.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/geometry.hpp"
#include "wpose/skeleton.hpp"
#include "wpose/types.hpp"

namespace wpose {

struct WidthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergedTraining : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllDepthDead : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LifterVariant : std::uint32_t {
  default_lifting = 0,   // inputs 17 x (u, v, depth)
  baseline = 1,          // inputs 17 x (u, v), no depth
  projection_residual = 2,  // inputs: rough root-relative backprojection
};

struct DenseLayer {
  int in = 0, out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct BatchNormLayer {
  int width = 0;
  std::vector<double> gamma, beta;        // trainable
  std::vector<double> run_mean, run_var;  // running statistics
};

struct LifterModel {
  LifterVariant variant = LifterVariant::default_lifting;
  int input_width = 51;
  int hidden_width = 256;
  int n_blocks = 2;

  DenseLayer input_layer;
  BatchNormLayer input_bn;
  struct ResBlock {
    DenseLayer fc1;
    BatchNormLayer bn1;
    DenseLayer fc2;
    BatchNormLayer bn2;
  };
  std::vector<ResBlock> blocks;
  DenseLayer output_layer;  // hidden -> 51

  static LifterModel create(LifterVariant variant, int input_width,
                            int hidden_width, int n_blocks, std::uint64_t seed);
  std::size_t parameter_count() const;  // trainable parameters
};

struct TrainConfig {
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double lr_init = 2e-3, lr_final = 1e-5;
  int epochs = 30;
  int batch_size = 32;
  double grad_clip = 0.2;      // elementwise [-clip, +clip]
  double dropout = 0.5;        // linear layers, train time only
  double weight_decay = 1e-5;  // L2
  double bn_momentum = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// lr(t) = lr_final + (lr_init - lr_final) * (1 + cos(pi t / T)) / 2
double cosine_lr(const TrainConfig& cfg, double t, double total);

struct LiftSample {
  std::vector<double> inputs;              // model input_width
  std::array<Vec3, kKeypointCount> target;  // meters, root-relative
};

// Centered pixel coordinates, both axes divided by the frame width so the
// aspect ratio is preserved. Returns 17 x (u', v') flattened.
std::vector<double> normalize_2d(const Skeleton2D& skel, double frame_w,
                                 double frame_h);

// Assemble the network input for a detection. For projection_residual the
// input is the rough backprojection (root-relative, flattened).
std::vector<double> make_lift_input(const Skeleton2D& det, LifterVariant variant,
                                    const CameraRig& rig, const Topology& topo,
                                    double depth_max = 10.0);
LiftSample make_lift_sample(const Skeleton2D& det, const Skeleton3D& gt,
                            LifterVariant variant, const CameraRig& rig,
                            const Topology& topo, double depth_max = 10.0);

// Inference-mode forward pass (running BN statistics, no dropout).
std::array<Vec3, kKeypointCount> lifter_forward(const LifterModel& model,
                                                const std::vector<double>& inputs);

// Overflow-safe mean of log(cosh(pred - target)) over n values.
double log_cosh_loss(const double* pred, const double* target, int n);

// Per-keypoint pinhole backprojection through the assigned camera, gait
// points mapped through the extrinsic transform; dead-depth keypoints get
// the mean of their live topology neighbors. Throws AllDepthDead.
Skeleton3D rough_backprojection(const Skeleton2D& det, const CameraRig& rig,
                                const Topology& topo);
Skeleton3D projection_residual_forward(const Skeleton2D& det, const CameraRig& rig,
                                       const LifterModel& residual_model,
                                       const Topology& topo);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_mpjpe_mm = 0;
};

struct TrainResult {
  LifterModel model;  // epoch-best by validation MPJPE
  std::vector<EpochLog> log;
  int best_epoch = -1;
};

TrainResult train_lifter(const std::vector<LiftSample>& train_set,
                         const std::vector<LiftSample>& val_set,
                         LifterVariant variant, const TrainConfig& cfg,
                         int hidden_width = 256, int n_blocks = 2);

// Flat parameter order: input layer, blocks in order (fc1, bn1, fc2, bn2),
// output layer; within a dense layer w then b, within a BN gamma then beta.
std::size_t flat_parameter_count(const LifterModel& model);
void get_flat_parameters(const LifterModel& model, std::vector<double>& out);
void set_flat_parameters(LifterModel& model, const std::vector<double>& in);

// Training-mode batch loss (log-cosh + L2 penalty) under a fixed dropout
// mask seed, and its analytic gradient in flat parameter order. Running BN
// statistics are not touched, so these are pure in the model parameters —
// the finite-difference oracle relies on that.
double train_batch_loss(const LifterModel& model, const TrainConfig& cfg,
                        const LiftSample* const* batch, int batch_size,
                        std::uint64_t mask_seed);
double train_batch_gradients(const LifterModel& model, const TrainConfig& cfg,
                             const LiftSample* const* batch, int batch_size,
                             std::uint64_t mask_seed, std::vector<double>& grad);

// Model file: header {magic, version, variant, widths}, then per-layer
// records {kind, rows, cols, payload} as little-endian doubles.
void save_model(const LifterModel& model, const std::string& path);
LifterModel load_model(const std::string& path);
std::vector<std::uint8_t> serialize_model(const LifterModel& model);
LifterModel deserialize_model(const std::uint8_t* data, std::size_t size);

}  // namespace wpose
