#include "wpose/lifter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "wpose/kernels.hpp"

namespace wpose {

namespace {

constexpr double kBnEps = 1e-5;
constexpr std::uint32_t kModelMagic = 0x4D4C5057;  // "WPLM" little-endian
constexpr std::uint32_t kModelVersion = 1;
constexpr int kOutputWidth = 3 * kKeypointCount;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

DenseLayer make_dense(int in, int out, std::mt19937_64& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.w.resize(static_cast<std::size_t>(out) * in);
  l.b.assign(static_cast<std::size_t>(out), 0.0);
  const double bound = 1.0 / std::sqrt(double(in));  // scaled uniform fan-in
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : l.w) w = dist(rng);
  return l;
}

BatchNormLayer make_bn(int width) {
  BatchNormLayer bn;
  bn.width = width;
  bn.gamma.assign(std::size_t(width), 1.0);
  bn.beta.assign(static_cast<std::size_t>(width), 0.0);
  bn.run_mean.assign(static_cast<std::size_t>(width), 0.0);
  bn.run_var.assign(std::size_t(width), 1.0);
  return bn;
}

}  // namespace

LifterModel LifterModel::create(LifterVariant variant, int input_width,
                                int hidden_width, int n_blocks,
                                std::uint64_t seed) {
  if (input_width <= 0 || hidden_width <= 0 || n_blocks < 0)
    throw std::invalid_argument("lifter: bad architecture parameters");
  LifterModel m;
  m.variant = variant;
  m.input_width = input_width;
  m.hidden_width = hidden_width;
  m.n_blocks = n_blocks;
  std::mt19937_64 rng(splitmix64(seed));
  m.input_layer = make_dense(input_width, hidden_width, rng);
  m.input_bn = make_bn(hidden_width);
  m.blocks.resize(static_cast<std::size_t>(n_blocks));
  for (auto& blk : m.blocks) {
    blk.fc1 = make_dense(hidden_width, hidden_width, rng);
    blk.bn1 = make_bn(hidden_width);
    blk.fc2 = make_dense(hidden_width, hidden_width, rng);
    blk.bn2 = make_bn(hidden_width);
  }
  m.output_layer = make_dense(hidden_width, kOutputWidth, rng);
  return m;
}

std::size_t LifterModel::parameter_count() const {
  auto dense = [](const DenseLayer& l) { return l.w.size() + l.b.size(); };
  auto bn = [](const BatchNormLayer& l) { return l.gamma.size() + l.beta.size(); };
  std::size_t n = dense(input_layer) + bn(input_bn) + dense(output_layer);
  for (const auto& blk : blocks)
    n += dense(blk.fc1) + bn(blk.bn1) + dense(blk.fc2) + bn(blk.bn2);
  return n;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr_final < lr_init))
    throw std::invalid_argument("train: lr_final must be < lr_init");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(dropout >= 0 && dropout < 1))
    throw std::invalid_argument("train: dropout must be in [0,1)");
  if (!(grad_clip > 0)) throw std::invalid_argument("train: grad_clip must be > 0");
}

double cosine_lr(const TrainConfig& cfg, double t, double total) {
  if (t <= 0) return cfg.lr_init;
  if (t >= total) return cfg.lr_final;
  return cfg.lr_final +
         0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(M_PI * t / total));
}

std::vector<double> normalize_2d(const Skeleton2D& skel, double frame_w,
                                 double frame_h) {
  std::vector<double> out(2 * kKeypointCount);
  for (int k = 0; k < kKeypointCount; ++k) {
    out[2 * k] = (skel.coords[k].x() - frame_w / 2.0) / frame_w;
    out[2 * k + 1] = (skel.coords[k].y() - frame_h / 2.0) / frame_w;
  }
  return out;
}

double log_cosh_loss(const double* pred, const double* target, int n) {
  // log(cosh(x)) = |x| + log1p(exp(-2|x|)) - log(2), safe for large |x|
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const double a = std::abs(pred[i] - target[i]);
    acc += a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
  }
  return acc / double(n);
}

Skeleton3D rough_backprojection(const Skeleton2D& det, const CameraRig& rig,
                                const Topology& topo) {
  const auto split = split_concat_coords(det, topo, rig.posture.height);
  Skeleton3D out;
  out.timestamp = det.timestamp;
  std::array<bool, kKeypointCount> live{};
  int n_live = 0;
  for (int k = 0; k < kKeypointCount; ++k) {
    const CameraIntrinsics& cam =
        split[k].camera == CameraId::posture ? rig.posture : rig.gait;
    const double d = det.depth_at_kp[k];
    if (std::isfinite(d) && d > cam.depth_min && d <= cam.depth_max) {
      Vec3 p = backproject(split[k].pixel, d, cam);
      if (split[k].camera == CameraId::gait)
        p = apply_transform(rig.gait_to_posture, p);
      out.coords[k] = p;
      live[k] = true;
      ++n_live;
    }
  }
  if (n_live == 0)
    throw AllDepthDead("rough backprojection: no keypoint has a live depth");

  Vec3 centroid = Vec3::Zero();
  for (int k = 0; k < kKeypointCount; ++k)
    if (live[k]) centroid += out.coords[k];
  centroid /= double(n_live);

  for (int k = 0; k < kKeypointCount; ++k) {
    if (live[k]) continue;
    Vec3 acc = Vec3::Zero();
    int n = 0;
    for (int nb : topo.neighbors(k))
      if (live[nb]) {
        acc += out.coords[nb];
        ++n;
      }
    out.coords[k] = n > 0 ? Vec3(acc / double(n)) : centroid;
  }
  return out;
}

std::vector<double> make_lift_input(const Skeleton2D& det, LifterVariant variant,
                                    const CameraRig& rig, const Topology& topo,
                                    double depth_max) {
  if (variant == LifterVariant::projection_residual) {
    const Skeleton3D rel =
        root_relative(rough_backprojection(det, rig, topo), topo);
    std::vector<double> out(3 * kKeypointCount);
    for (int k = 0; k < kKeypointCount; ++k)
      for (int a = 0; a < 3; ++a) out[3 * k + a] = rel.coords[k](a);
    return out;
  }
  const double frame_w = rig.posture.width;
  const double frame_h = rig.posture.height + rig.gait.height;
  const std::vector<double> uv = normalize_2d(det, frame_w, frame_h);
  if (variant == LifterVariant::baseline) return uv;
  std::vector<double> out(3 * kKeypointCount);
  for (int k = 0; k < kKeypointCount; ++k) {
    out[3 * k] = uv[2 * k];
    out[3 * k + 1] = uv[2 * k + 1];
    out[3 * k + 2] = std::clamp(det.depth_at_kp[k] / depth_max, 0.0, 1.0);
  }
  return out;
}

LiftSample make_lift_sample(const Skeleton2D& det, const Skeleton3D& gt,
                            LifterVariant variant, const CameraRig& rig,
                            const Topology& topo, double depth_max) {
  LiftSample s;
  s.inputs = make_lift_input(det, variant, rig, topo, depth_max);
  const Skeleton3D gt_rel = root_relative(gt, topo);
  if (variant == LifterVariant::projection_residual) {
    const Skeleton3D rough_rel =
        root_relative(rough_backprojection(det, rig, topo), topo);
    for (int k = 0; k < kKeypointCount; ++k)
      s.target[k] = gt_rel.coords[k] - rough_rel.coords[k];
  } else {
    s.target = gt_rel.coords;
  }
  return s;
}

// ------------------------------------------------------------ internals

namespace {

void dense_forward(const DenseLayer& fc, const double* x, double* y, int batch) {
  const auto& k = kernels::ops();
  for (int b = 0; b < batch; ++b) {
    double* row = y + std::size_t(b) * fc.out;
    k.matvec(fc.w.data(), x + std::size_t(b) * fc.in, row, fc.out, fc.in);
    for (int j = 0; j < fc.out; ++j) row[j] += fc.b[j];
  }
}

void bn_relu_inference(const BatchNormLayer& bn, double* y, int batch) {
  std::vector<double> a(static_cast<std::size_t>(bn.width)), c(static_cast<std::size_t>(bn.width));
  for (int j = 0; j < bn.width; ++j) {
    a[j] = bn.gamma[j] / std::sqrt(bn.run_var[j] + kBnEps);
    c[j] = bn.beta[j] - a[j] * bn.run_mean[j];
  }
  for (int b = 0; b < batch; ++b) {
    double* row = y + std::size_t(b) * bn.width;
    for (int j = 0; j < bn.width; ++j) {
      const double v = a[j] * row[j] + c[j];
      row[j] = v > 0 ? v : 0.0;
    }
  }
}

struct UnitCache {
  std::vector<double> xhat;  // [B x out]
  std::vector<double> post;  // [B x out] after relu (+ dropout)
  std::vector<double> drop;  // [B x out] multipliers; empty when p == 0
  std::vector<double> mean, var, inv_std;  // [out] batch statistics
};

void unit_forward_train(const DenseLayer& fc, const BatchNormLayer& bn,
                        const double* x, int batch, double dropout_p,
                        std::mt19937_64& mask_rng, UnitCache& c) {
  const int w = fc.out;
  const std::size_t n = std::size_t(batch) * w;
  c.xhat.resize(n);
  c.post.resize(n);
  c.mean.assign(static_cast<std::size_t>(w), 0.0);
  c.var.assign(static_cast<std::size_t>(w), 0.0);
  c.inv_std.resize(static_cast<std::size_t>(w));
  // linear output lands in xhat, normalized in place below
  dense_forward(fc, x, c.xhat.data(), batch);

  const double inv_b = 1.0 / double(batch);
  for (int b = 0; b < batch; ++b) {
    const double* row = c.xhat.data() + std::size_t(b) * w;
    for (int j = 0; j < w; ++j) c.mean[j] += row[j];
  }
  for (int j = 0; j < w; ++j) c.mean[j] *= inv_b;
  for (int b = 0; b < batch; ++b) {
    const double* row = c.xhat.data() + std::size_t(b) * w;
    for (int j = 0; j < w; ++j) {
      const double d = row[j] - c.mean[j];
      c.var[j] += d * d;
    }
  }
  for (int j = 0; j < w; ++j) {
    c.var[j] *= inv_b;  // batch normalization uses the population variance
    c.inv_std[j] = 1.0 / std::sqrt(c.var[j] + kBnEps);
  }
  for (int b = 0; b < batch; ++b) {
    double* xh = c.xhat.data() + std::size_t(b) * w;
    double* post = c.post.data() + std::size_t(b) * w;
    for (int j = 0; j < w; ++j) {
      xh[j] = (xh[j] - c.mean[j]) * c.inv_std[j];
      const double y = bn.gamma[j] * xh[j] + bn.beta[j];
      post[j] = y > 0 ? y : 0.0;
    }
  }
  if (dropout_p > 0) {
    c.drop.resize(n);
    const double keep = 1.0 - dropout_p;
    const double inv_keep = 1.0 / keep;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      c.drop[i] = u(mask_rng) < keep ? inv_keep : 0.0;
      c.post[i] *= c.drop[i];
    }
  } else {
    c.drop.clear();
  }
}

struct DenseGrads {
  double* w = nullptr;
  double* b = nullptr;
};
struct BnGrads {
  double* gamma = nullptr;
  double* beta = nullptr;
};
struct BlockGrads {
  DenseGrads fc1, fc2;
  BnGrads bn1, bn2;
};
struct GradViews {
  DenseGrads input, output;
  BnGrads input_bn;
  std::vector<BlockGrads> blocks;
};

// Canonical flat order: input (w,b), input_bn (gamma,beta), per block
// fc1, bn1, fc2, bn2, then output (w,b).
GradViews map_flat(const LifterModel& m, double* flat) {
  GradViews v;
  double* p = flat;
  auto dense = [&p](const DenseLayer& l) {
    DenseGrads g{p, p + l.w.size()};
    p += l.w.size() + l.b.size();
    return g;
  };
  auto bn = [&p](const BatchNormLayer& l) {
    BnGrads g{p, p + l.gamma.size()};
    p += l.gamma.size() + l.beta.size();
    return g;
  };
  v.input = dense(m.input_layer);
  v.input_bn = bn(m.input_bn);
  v.blocks.resize(m.blocks.size());
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    v.blocks[i].fc1 = dense(m.blocks[i].fc1);
    v.blocks[i].bn1 = bn(m.blocks[i].bn1);
    v.blocks[i].fc2 = dense(m.blocks[i].fc2);
    v.blocks[i].bn2 = bn(m.blocks[i].bn2);
  }
  v.output = dense(m.output_layer);
  return v;
}

// dpost is consumed in place; dx is assigned; parameter grads accumulate.
void unit_backward(const DenseLayer& fc, const BatchNormLayer& bn,
                   const double* x_in, const UnitCache& c, double* dpost,
                   double* dx, int batch, DenseGrads gfc, BnGrads gbn) {
  const int w = fc.out;
  const auto& k = kernels::ops();
  const std::size_t n = std::size_t(batch) * w;

  if (!c.drop.empty())
    for (std::size_t i = 0; i < n; ++i)
      dpost[i] = c.post[i] > 0 ? dpost[i] * c.drop[i] : 0.0;
  else
    for (std::size_t i = 0; i < n; ++i) dpost[i] = c.post[i] > 0 ? dpost[i] : 0.0;

  std::vector<double> sum_dy(static_cast<std::size_t>(w), 0.0), sum_dy_xhat(static_cast<std::size_t>(w), 0.0);
  for (int b = 0; b < batch; ++b) {
    const double* dy = dpost + std::size_t(b) * w;
    const double* xh = c.xhat.data() + std::size_t(b) * w;
    for (int j = 0; j < w; ++j) {
      sum_dy[j] += dy[j];
      sum_dy_xhat[j] += dy[j] * xh[j];
    }
  }
  for (int j = 0; j < w; ++j) {
    gbn.gamma[j] += sum_dy_xhat[j];
    gbn.beta[j] += sum_dy[j];
  }
  const double inv_b = 1.0 / double(batch);
  for (int b = 0; b < batch; ++b) {
    double* dy = dpost + std::size_t(b) * w;
    const double* xh = c.xhat.data() + std::size_t(b) * w;
    for (int j = 0; j < w; ++j)
      dy[j] = bn.gamma[j] * c.inv_std[j] *
              (dy[j] - inv_b * sum_dy[j] - xh[j] * inv_b * sum_dy_xhat[j]);
  }

  // dense backward: dpost now holds dL/d(linear output)
  std::fill(dx, dx + std::size_t(batch) * fc.in, 0.0);
  for (int b = 0; b < batch; ++b) {
    const double* g = dpost + std::size_t(b) * w;
    const double* xr = x_in + std::size_t(b) * fc.in;
    k.ger_acc(gfc.w, g, xr, fc.out, fc.in);
    for (int j = 0; j < w; ++j) gfc.b[j] += g[j];
    k.matvec_t_acc(fc.w.data(), g, dx + std::size_t(b) * fc.in, fc.out, fc.in);
  }
}

struct Workspace {
  std::vector<double> x0;  // [B x in]
  UnitCache input;
  std::vector<std::array<UnitCache, 2>> blocks;
  std::vector<double> block_in;   // per block [B x H], input to the block
  std::vector<double> block_out;  // per block [B x H], skip + unit2 post
  std::vector<double> pred;       // [B x 51]
  std::vector<double> dpred;      // [B x 51]
  std::vector<double> d_out, d_a, d_b;  // [B x H] scratch
};

// Training-mode forward. Returns the data loss term; fills ws (and the
// prediction gradient when want_grad).
double forward_train(const LifterModel& m, const LiftSample* const* batch,
                     int bsz, double dropout_p, std::uint64_t mask_seed,
                     Workspace& ws, bool want_grad) {
  const int in_w = m.input_width;
  const int h = m.hidden_width;
  const std::size_t bh = std::size_t(bsz) * h;
  ws.x0.resize(static_cast<std::size_t>(bsz) * in_w);
  for (int b = 0; b < bsz; ++b) {
    if (int(batch[b]->inputs.size()) != in_w) {
      std::ostringstream msg;
      msg << "sample input width " << batch[b]->inputs.size()
          << " does not match model width " << in_w;
      throw WidthMismatch(msg.str());
    }
    std::copy(batch[b]->inputs.begin(), batch[b]->inputs.end(),
              ws.x0.begin() + std::size_t(b) * in_w);
  }

  std::mt19937_64 mask_rng(splitmix64(mask_seed));
  ws.blocks.resize(m.blocks.size());
  ws.block_in.resize(m.blocks.size() * bh);
  ws.block_out.resize(m.blocks.size() * bh);

  unit_forward_train(m.input_layer, m.input_bn, ws.x0.data(), bsz, dropout_p,
                     mask_rng, ws.input);
  const double* cur = ws.input.post.data();
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    double* in_i = ws.block_in.data() + i * bh;
    double* out_i = ws.block_out.data() + i * bh;
    std::copy(cur, cur + bh, in_i);
    unit_forward_train(m.blocks[i].fc1, m.blocks[i].bn1, in_i, bsz, dropout_p,
                       mask_rng, ws.blocks[i][0]);
    unit_forward_train(m.blocks[i].fc2, m.blocks[i].bn2,
                       ws.blocks[i][0].post.data(), bsz, dropout_p, mask_rng,
                       ws.blocks[i][1]);
    const double* q = ws.blocks[i][1].post.data();
    for (std::size_t j = 0; j < bh; ++j) out_i[j] = in_i[j] + q[j];
    cur = out_i;
  }

  ws.pred.resize(static_cast<std::size_t>(bsz) * kOutputWidth);
  dense_forward(m.output_layer, cur, ws.pred.data(), bsz);

  const double inv_n = 1.0 / double(static_cast<std::size_t>(bsz) * kOutputWidth);
  double loss = 0;
  if (want_grad) ws.dpred.assign(std::size_t(bsz) * kOutputWidth, 0.0);
  for (int b = 0; b < bsz; ++b) {
    const double* pr = ws.pred.data() + std::size_t(b) * kOutputWidth;
    const LiftSample& s = *batch[b];
    for (int k = 0; k < kKeypointCount; ++k)
      for (int a = 0; a < 3; ++a) {
        const double r = pr[3 * k + a] - s.target[k](a);
        const double ar = std::abs(r);
        loss += ar + std::log1p(std::exp(-2.0 * ar)) - M_LN2;
        if (want_grad)
          ws.dpred[std::size_t(b) * kOutputWidth + 3 * k + a] = std::tanh(r) * inv_n;
      }
  }
  return loss * inv_n;
}

void backward(const LifterModel& m, Workspace& ws, int bsz, GradViews& g) {
  const int h = m.hidden_width;
  const auto& k = kernels::ops();
  const std::size_t bh = std::size_t(bsz) * h;

  // output layer; d(last hidden) into d_out
  ws.d_out.assign(bh, 0.0);
  const double* out_in = m.blocks.empty() ? ws.input.post.data()
                                          : ws.block_out.data() + (m.blocks.size() - 1) * bh;
  for (int b = 0; b < bsz; ++b) {
    const double* gy = ws.dpred.data() + std::size_t(b) * kOutputWidth;
    const double* xr = out_in + std::size_t(b) * h;
    k.ger_acc(g.output.w, gy, xr, kOutputWidth, h);
    for (int j = 0; j < kOutputWidth; ++j) g.output.b[j] += gy[j];
    k.matvec_t_acc(m.output_layer.w.data(), gy,
                   ws.d_out.data() + std::size_t(b) * h, kOutputWidth, h);
  }

  ws.d_a.resize(bh);
  ws.d_b.resize(bh);
  for (int i = int(m.blocks.size()) - 1; i >= 0; --i) {
    const double* in_i = ws.block_in.data() + std::size_t(i) * bh;
    // block output = input + unit2(unit1(input)); d_out holds d(block out)
    std::copy(ws.d_out.begin(), ws.d_out.end(), ws.d_a.begin());
    unit_backward(m.blocks[i].fc2, m.blocks[i].bn2, ws.blocks[i][0].post.data(),
                  ws.blocks[i][1], ws.d_a.data(), ws.d_b.data(), bsz,
                  g.blocks[i].fc2, g.blocks[i].bn2);
    unit_backward(m.blocks[i].fc1, m.blocks[i].bn1, in_i, ws.blocks[i][0],
                  ws.d_b.data(), ws.d_a.data(), bsz, g.blocks[i].fc1,
                  g.blocks[i].bn1);
    // skip path adds the untouched d(block out)
    for (std::size_t j = 0; j < bh; ++j) ws.d_out[j] += ws.d_a[j];
  }

  std::vector<double> dx0(static_cast<std::size_t>(bsz) * m.input_width);
  unit_backward(m.input_layer, m.input_bn, ws.x0.data(), ws.input,
                ws.d_out.data(), dx0.data(), bsz, g.input, g.input_bn);
}

double l2_penalty(const LifterModel& m, double wd) {
  if (wd <= 0) return 0;
  const auto& k = kernels::ops();
  double acc = k.sum_sq(m.input_layer.w.data(), int(m.input_layer.w.size()));
  for (const auto& blk : m.blocks) {
    acc += k.sum_sq(blk.fc1.w.data(), int(blk.fc1.w.size()));
    acc += k.sum_sq(blk.fc2.w.data(), int(blk.fc2.w.size()));
  }
  acc += k.sum_sq(m.output_layer.w.data(), int(m.output_layer.w.size()));
  return 0.5 * wd * acc;
}

void add_l2_gradient(const LifterModel& m, double wd, GradViews& g) {
  if (wd <= 0) return;
  const auto& k = kernels::ops();
  k.axpy(wd, m.input_layer.w.data(), g.input.w, int(m.input_layer.w.size()));
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    k.axpy(wd, m.blocks[i].fc1.w.data(), g.blocks[i].fc1.w, int(m.blocks[i].fc1.w.size()));
    k.axpy(wd, m.blocks[i].fc2.w.data(), g.blocks[i].fc2.w, int(m.blocks[i].fc2.w.size()));
  }
  k.axpy(wd, m.output_layer.w.data(), g.output.w, int(m.output_layer.w.size()));
}

void update_running_stats(LifterModel& m, const Workspace& ws, int bsz,
                          double momentum) {
  if (bsz < 2) return;  // unbiased variance needs at least two samples
  const double unbias = double(bsz) / double(bsz - 1);
  auto update = [&](BatchNormLayer& bn, const UnitCache& c) {
    for (int j = 0; j < bn.width; ++j) {
      bn.run_mean[j] = (1.0 - momentum) * bn.run_mean[j] + momentum * c.mean[j];
      bn.run_var[j] = (1.0 - momentum) * bn.run_var[j] + momentum * c.var[j] * unbias;
    }
  };
  update(m.input_bn, ws.input);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    update(m.blocks[i].bn1, ws.blocks[i][0]);
    update(m.blocks[i].bn2, ws.blocks[i][1]);
  }
}

}  // namespace

std::array<Vec3, kKeypointCount> lifter_forward(const LifterModel& m,
                                                const std::vector<double>& inputs) {
  if (int(inputs.size()) != m.input_width) {
    std::ostringstream msg;
    msg << "input width " << inputs.size() << " does not match model width "
        << m.input_width;
    throw WidthMismatch(msg.str());
  }
  const int h = m.hidden_width;
  std::vector<double> cur(static_cast<std::size_t>(h));
  dense_forward(m.input_layer, inputs.data(), cur.data(), 1);
  bn_relu_inference(m.input_bn, cur.data(), 1);
  std::vector<double> tmp(static_cast<std::size_t>(h));
  for (const auto& blk : m.blocks) {
    dense_forward(blk.fc1, cur.data(), tmp.data(), 1);
    bn_relu_inference(blk.bn1, tmp.data(), 1);
    std::vector<double> tmp2(static_cast<std::size_t>(h));
    dense_forward(blk.fc2, tmp.data(), tmp2.data(), 1);
    bn_relu_inference(blk.bn2, tmp2.data(), 1);
    for (int j = 0; j < h; ++j) cur[j] += tmp2[j];
  }
  std::vector<double> out(static_cast<std::size_t>(kOutputWidth));
  dense_forward(m.output_layer, cur.data(), out.data(), 1);
  std::array<Vec3, kKeypointCount> result;
  for (int k = 0; k < kKeypointCount; ++k)
    result[k] = Vec3(out[3 * k], out[3 * k + 1], out[3 * k + 2]);
  return result;
}

Skeleton3D projection_residual_forward(const Skeleton2D& det, const CameraRig& rig,
                                       const LifterModel& residual_model,
                                       const Topology& topo) {
  if (residual_model.input_width != 3 * kKeypointCount)
    throw WidthMismatch("projection-residual model must take 17x3 inputs");
  const Skeleton3D rough = rough_backprojection(det, rig, topo);
  const Vec3 pelvis = rough.coords[topo.root_index];
  std::vector<double> input(3 * kKeypointCount);
  for (int k = 0; k < kKeypointCount; ++k) {
    const Vec3 rel = rough.coords[k] - pelvis;
    for (int a = 0; a < 3; ++a) input[3 * k + a] = rel(a);
  }
  const auto corr = lifter_forward(residual_model, input);
  Skeleton3D out;
  out.timestamp = det.timestamp;
  for (int k = 0; k < kKeypointCount; ++k)
    out.coords[k] = rough.coords[k] + corr[k];
  return out;
}

std::size_t flat_parameter_count(const LifterModel& model) {
  return model.parameter_count();
}

void get_flat_parameters(const LifterModel& model, std::vector<double>& out) {
  out.resize(model.parameter_count());
  double* p = out.data();
  auto dense = [&p](const DenseLayer& l) {
    p = std::copy(l.w.begin(), l.w.end(), p);
    p = std::copy(l.b.begin(), l.b.end(), p);
  };
  auto bn = [&p](const BatchNormLayer& l) {
    p = std::copy(l.gamma.begin(), l.gamma.end(), p);
    p = std::copy(l.beta.begin(), l.beta.end(), p);
  };
  dense(model.input_layer);
  bn(model.input_bn);
  for (const auto& blk : model.blocks) {
    dense(blk.fc1);
    bn(blk.bn1);
    dense(blk.fc2);
    bn(blk.bn2);
  }
  dense(model.output_layer);
}

void set_flat_parameters(LifterModel& model, const std::vector<double>& in) {
  if (in.size() != model.parameter_count())
    throw WidthMismatch("flat parameter vector size mismatch");
  const double* p = in.data();
  auto dense = [&p](DenseLayer& l) {
    std::copy(p, p + l.w.size(), l.w.begin());
    p += l.w.size();
    std::copy(p, p + l.b.size(), l.b.begin());
    p += l.b.size();
  };
  auto bn = [&p](BatchNormLayer& l) {
    std::copy(p, p + l.gamma.size(), l.gamma.begin());
    p += l.gamma.size();
    std::copy(p, p + l.beta.size(), l.beta.begin());
    p += l.beta.size();
  };
  dense(model.input_layer);
  bn(model.input_bn);
  for (auto& blk : model.blocks) {
    dense(blk.fc1);
    bn(blk.bn1);
    dense(blk.fc2);
    bn(blk.bn2);
  }
  dense(model.output_layer);
}

double train_batch_loss(const LifterModel& model, const TrainConfig& cfg,
                        const LiftSample* const* batch, int batch_size,
                        std::uint64_t mask_seed) {
  Workspace ws;
  const double data = forward_train(model, batch, batch_size, cfg.dropout,
                                    mask_seed, ws, /*want_grad=*/false);
  return data + l2_penalty(model, cfg.weight_decay);
}

double train_batch_gradients(const LifterModel& model, const TrainConfig& cfg,
                             const LiftSample* const* batch, int batch_size,
                             std::uint64_t mask_seed, std::vector<double>& grad) {
  Workspace ws;
  const double data = forward_train(model, batch, batch_size, cfg.dropout,
                                    mask_seed, ws, /*want_grad=*/true);
  grad.assign(model.parameter_count(), 0.0);
  GradViews views = map_flat(model, grad.data());
  backward(model, ws, batch_size, views);
  add_l2_gradient(model, cfg.weight_decay, views);
  return data + l2_penalty(model, cfg.weight_decay);
}

TrainResult train_lifter(const std::vector<LiftSample>& train_set,
                         const std::vector<LiftSample>& val_set,
                         LifterVariant variant, const TrainConfig& cfg,
                         int hidden_width, int n_blocks) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const int input_width = int(train_set[0].inputs.size());

  TrainResult result;
  LifterModel model = LifterModel::create(variant, input_width, hidden_width,
                                          n_blocks, cfg.seed);

  std::vector<double> grad, adam_m(model.parameter_count(), 0.0),
      adam_v(model.parameter_count(), 0.0);
  std::vector<double> flat;
  get_flat_parameters(model, flat);  // flat is the optimizer's master copy
  Workspace ws;
  std::mt19937_64 shuffle_rng(splitmix64(cfg.seed ^ 0xA5A5A5A5A5A5A5A5ull));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto& k = kernels::ops();
  std::vector<const LiftSample*> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  double best_val = std::numeric_limits<double>::infinity();
  long step = 0;

  auto validate_mpjpe_mm = [&]() {
    if (val_set.empty()) return 0.0;
    double acc = 0;
    for (const LiftSample& s : val_set) {
      const auto pred = lifter_forward(model, s.inputs);
      const Vec3 dp = pred[default_topology().root_index];
      const Vec3 dt = s.target[default_topology().root_index];
      for (int j = 0; j < kKeypointCount; ++j)
        acc += ((pred[j] - dp) - (s.target[j] - dt)).norm();
    }
    return 1000.0 * acc / (double(val_set.size()) * kKeypointCount);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg, double(epoch), double(cfg.epochs));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < order.size();
         start += std::size_t(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + std::size_t(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      const int bsz = int(batch.size());
      const std::uint64_t mask_seed =
          splitmix64(cfg.seed + 0x517CC1B727220A95ull * std::uint64_t(step + 1));

      const double data = forward_train(model, batch.data(), bsz, cfg.dropout,
                                        mask_seed, ws, /*want_grad=*/true);
      const double loss = data + l2_penalty(model, cfg.weight_decay);
      if (!std::isfinite(loss))
        throw DivergedTraining("training loss became non-finite at epoch " +
                               std::to_string(epoch));
      epoch_loss += loss;
      ++n_batches;

      grad.assign(model.parameter_count(), 0.0);
      GradViews views = map_flat(model, grad.data());
      backward(model, ws, bsz, views);
      add_l2_gradient(model, cfg.weight_decay, views);
      k.clip(grad.data(), int(grad.size()), -cfg.grad_clip, cfg.grad_clip);

      update_running_stats(model, ws, bsz, cfg.bn_momentum);

      ++step;
      const double corr1 = 1.0 - std::pow(cfg.beta1, double(step));
      const double corr2 = 1.0 - std::pow(cfg.beta2, double(step));
      k.adam_step(flat.data(), adam_m.data(), adam_v.data(), grad.data(),
                  int(flat.size()), lr, cfg.beta1, cfg.beta2, corr1, corr2,
                  cfg.adam_eps);
      set_flat_parameters(model, flat);
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = n_batches ? epoch_loss / double(n_batches) : 0.0;
    log.val_mpjpe_mm = validate_mpjpe_mm();
    result.log.push_back(log);

    const double score = val_set.empty() ? log.train_loss : log.val_mpjpe_mm;
    if (score < best_val) {
      best_val = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch < 0) {
    result.model = model;
    result.best_epoch = cfg.epochs - 1;
  }
  return result;
}

// ---------------------------------------------------------------- model io

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v & 0xff));
  out.push_back(std::uint8_t((v >> 8) & 0xff));
  out.push_back(std::uint8_t((v >> 16) & 0xff));
  out.push_back(std::uint8_t((v >> 24) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, const double* data, std::size_t n) {
  static_assert(sizeof(double) == 8);
  const std::size_t at = out.size();
  out.resize(at + n * 8);
  std::memcpy(out.data() + at, data, n * 8);
}

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;
  std::uint32_t u32() {
    if (end - p < 4) throw ModelIoError("truncated model data");
    std::uint32_t v = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                      (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
    p += 4;
    return v;
  }
  void f64(double* out, std::size_t n) {
    if (std::size_t(end - p) < n * 8) throw ModelIoError("truncated model data");
    std::memcpy(out, p, n * 8);
    p += n * 8;
  }
};

constexpr std::uint32_t kKindDense = 0;
constexpr std::uint32_t kKindBatchNorm = 1;

void put_dense(std::vector<std::uint8_t>& out, const DenseLayer& l) {
  put_u32(out, kKindDense);
  put_u32(out, std::uint32_t(l.out));
  put_u32(out, std::uint32_t(l.in));
  put_f64(out, l.w.data(), l.w.size());
  put_f64(out, l.b.data(), l.b.size());
}

void put_bn(std::vector<std::uint8_t>& out, const BatchNormLayer& l) {
  put_u32(out, kKindBatchNorm);
  put_u32(out, 1);
  put_u32(out, std::uint32_t(l.width));
  put_f64(out, l.gamma.data(), l.gamma.size());
  put_f64(out, l.beta.data(), l.beta.size());
  put_f64(out, l.run_mean.data(), l.run_mean.size());
  put_f64(out, l.run_var.data(), l.run_var.size());
}

DenseLayer read_dense(Reader& r, int expect_out, int expect_in) {
  if (r.u32() != kKindDense) throw ModelIoError("expected dense layer record");
  DenseLayer l;
  l.out = int(r.u32());
  l.in = int(r.u32());
  if (l.out != expect_out || l.in != expect_in)
    throw ModelIoError("dense layer dims do not match header");
  l.w.resize(static_cast<std::size_t>(l.out) * l.in);
  l.b.resize(static_cast<std::size_t>(l.out));
  r.f64(l.w.data(), l.w.size());
  r.f64(l.b.data(), l.b.size());
  return l;
}

BatchNormLayer read_bn(Reader& r, int expect_width) {
  if (r.u32() != kKindBatchNorm) throw ModelIoError("expected batch-norm record");
  if (r.u32() != 1) throw ModelIoError("bad batch-norm record");
  BatchNormLayer l;
  l.width = int(r.u32());
  if (l.width != expect_width)
    throw ModelIoError("batch-norm width does not match header");
  l.gamma.resize(static_cast<std::size_t>(l.width));
  l.beta.resize(static_cast<std::size_t>(l.width));
  l.run_mean.resize(static_cast<std::size_t>(l.width));
  l.run_var.resize(static_cast<std::size_t>(l.width));
  r.f64(l.gamma.data(), l.gamma.size());
  r.f64(l.beta.data(), l.beta.size());
  r.f64(l.run_mean.data(), l.run_mean.size());
  r.f64(l.run_var.data(), l.run_var.size());
  return l;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const LifterModel& m) {
  std::vector<std::uint8_t> out;
  put_u32(out, kModelMagic);
  put_u32(out, kModelVersion);
  put_u32(out, std::uint32_t(m.variant));
  put_u32(out, std::uint32_t(m.input_width));
  put_u32(out, std::uint32_t(m.hidden_width));
  put_u32(out, std::uint32_t(m.n_blocks));
  put_u32(out, std::uint32_t(2 + 4 * m.n_blocks + 1));  // record count
  put_dense(out, m.input_layer);
  put_bn(out, m.input_bn);
  for (const auto& blk : m.blocks) {
    put_dense(out, blk.fc1);
    put_bn(out, blk.bn1);
    put_dense(out, blk.fc2);
    put_bn(out, blk.bn2);
  }
  put_dense(out, m.output_layer);
  return out;
}

LifterModel deserialize_model(const std::uint8_t* data, std::size_t size) {
  Reader r{data, data + size};
  if (r.u32() != kModelMagic) throw ModelIoError("bad model magic");
  if (r.u32() != kModelVersion) throw ModelIoError("unsupported model version");
  LifterModel m;
  const std::uint32_t variant = r.u32();
  if (variant > 2) throw ModelIoError("unknown model variant tag");
  m.variant = LifterVariant(variant);
  m.input_width = int(r.u32());
  m.hidden_width = int(r.u32());
  m.n_blocks = int(r.u32());
  if (m.input_width <= 0 || m.hidden_width <= 0 || m.n_blocks < 0)
    throw ModelIoError("bad model dimensions");
  const std::uint32_t records = r.u32();
  if (records != std::uint32_t(2 + 4 * m.n_blocks + 1))
    throw ModelIoError("record count does not match architecture");
  m.input_layer = read_dense(r, m.hidden_width, m.input_width);
  m.input_bn = read_bn(r, m.hidden_width);
  m.blocks.resize(static_cast<std::size_t>(m.n_blocks));
  for (auto& blk : m.blocks) {
    blk.fc1 = read_dense(r, m.hidden_width, m.hidden_width);
    blk.bn1 = read_bn(r, m.hidden_width);
    blk.fc2 = read_dense(r, m.hidden_width, m.hidden_width);
    blk.bn2 = read_bn(r, m.hidden_width);
  }
  m.output_layer = read_dense(r, kOutputWidth, m.hidden_width);
  if (r.p != r.end) throw ModelIoError("trailing bytes in model data");
  return m;
}

void save_model(const LifterModel& m, const std::string& path) {
  const auto bytes = serialize_model(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelIoError("cannot write model file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
}

LifterModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ModelIoError("cannot open model file: " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw ModelIoError("cannot read model file: " + path);
  return deserialize_model(bytes.data(), bytes.size());
}

}  // namespace wpose
