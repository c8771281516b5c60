#include "wpose/synthgait.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace wpose::synth {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Body frame constants (posture-camera axes: x right, y down, z forward).
const Vec3 kPelvisAnchor(0.0, 0.32, 0.88);
const Vec3 kSpineDir = Vec3(0.0, -1.0, -0.06).normalized();
const Vec3 kShoulderDirL = Vec3(1.0, 0.23, 0.0).normalized();
const Vec3 kShoulderDirR = Vec3(-1.0, 0.23, 0.0).normalized();
const Vec3 kHipDirL = Vec3(0.9, 0.436, 0.0).normalized();
const Vec3 kHipDirR = Vec3(-0.9, 0.436, 0.0).normalized();
constexpr double kBobAmp = 0.015;
constexpr double kSwayAmp = 0.012;
constexpr double kFootPitch = 1.25;  // rad from vertical

constexpr std::array<double, kConnectionCount> kBaseLengths = {
    0.20,   // pelvis - spine_mid
    0.22,   // spine_mid - neck
    0.185,  // neck - left_shoulder
    0.185,  // neck - right_shoulder
    0.26,   // left upper arm
    0.26,   // right upper arm
    0.24,   // left forearm
    0.24,   // right forearm
    0.105,  // pelvis - left_hip
    0.105,  // pelvis - right_hip
    0.38,   // left thigh
    0.38,   // right thigh
    0.38,   // left shank
    0.38,   // right shank
    0.17,   // left foot
    0.17,   // right foot
};

// Elbow position for a two-link chain from shoulder S to wrist W; keeps
// both segment lengths exact and drops the elbow toward +y.
Vec3 two_link_elbow(const Vec3& s, const Vec3& w, double l1, double l2) {
  const Vec3 sw = w - s;
  const double d = sw.norm();
  if (!(d > std::abs(l1 - l2) + 1e-9 && d < l1 + l2 - 1e-9)) {
    std::ostringstream msg;
    msg << "handle unreachable: shoulder-wrist distance " << d
        << " vs arm segments " << l1 << " + " << l2;
    throw std::invalid_argument(msg.str());
  }
  const Vec3 axis = sw / d;
  const double a = (d * d + l1 * l1 - l2 * l2) / (2.0 * d);
  const double h2 = l1 * l1 - a * a;
  const double h = h2 > 0 ? std::sqrt(h2) : 0.0;
  Vec3 drop = Vec3(0, 1, 0) - Vec3(0, 1, 0).dot(axis) * axis;
  if (drop.squaredNorm() < 1e-12) drop = Vec3(1, 0, 0) - axis.x() * axis;
  return s + a * axis + h * drop.normalized();
}

}  // namespace

void GaitParams::validate() const {
  for (double l : segment_lengths)
    if (!(l > 0)) throw std::invalid_argument("gait params: segment lengths must be > 0");
  if (!(rate_hz >= 19.0))
    throw std::invalid_argument("gait params: sampling rate must be >= 19 Hz");
  if (!(duration_s > 0)) throw std::invalid_argument("gait params: duration must be > 0");
  if (!(speed_mps >= 0)) throw std::invalid_argument("gait params: speed must be >= 0");
  if (!(cadence_hz >= 0)) throw std::invalid_argument("gait params: cadence must be >= 0");
  auto rate01 = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate01(noise.dead_pixel_rate) || !rate01(noise.occlusion_rate))
    throw std::invalid_argument("gait params: noise rates must be in [0,1]");
}

std::array<double, kConnectionCount> anthropometry(double scale, std::uint64_t seed) {
  std::array<double, kConnectionCount> out{};
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  // mirrored segments share one draw so the subject stays symmetric
  const std::array<std::pair<int, int>, 7> pairs = {
      {{2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}, {12, 13}, {14, 15}}};
  out[0] = kBaseLengths[0] * scale * (1.0 + jitter(rng));
  out[1] = kBaseLengths[1] * scale * (1.0 + jitter(rng));
  for (const auto& [l, r] : pairs) {
    const double j = 1.0 + jitter(rng);
    out[std::size_t(l)] = kBaseLengths[std::size_t(l)] * scale * j;
    out[std::size_t(r)] = kBaseLengths[std::size_t(r)] * scale * j;
  }
  return out;
}

std::array<Vec3, 2> default_handles() {
  return {Vec3(0.19, 0.18, 0.58), Vec3(-0.19, 0.18, 0.58)};
}

GaitParams default_params(double scale, double speed, std::uint64_t seed) {
  GaitParams p;
  p.segment_lengths = anthropometry(scale, seed);
  p.speed_mps = speed;
  p.cadence_hz = 0.9 + speed;
  p.handles = default_handles();
  p.seed = seed;
  return p;
}

CameraRig default_rig() {
  CameraRig rig;
  rig.posture = {525.0, 525.0, 320.0, 240.0, 640, 480, 0.25, 10.0};
  rig.gait = rig.posture;
  // Gait camera 0.62 m below and 0.60 m behind the posture camera,
  // pitched down 10 degrees at the legs.
  const double a = 10.0 * M_PI / 180.0;
  Mat3 pitch_down;
  pitch_down << 1, 0, 0, 0, std::cos(a), std::sin(a), 0, -std::sin(a), std::cos(a);
  rig.gait_to_posture.rotation = pitch_down;
  rig.gait_to_posture.translation = Vec3(0.0, 0.62, -0.60);
  rig.gait_to_posture.scale = 1.0;
  rig.validate();
  return rig;
}

SyntheticSequence generate_sequence(const GaitParams& params) {
  params.validate();
  const auto& L = params.segment_lengths;

  const double leg = 0.5 * (L[10] + L[11] + L[12] + L[13]);
  const double stride = params.cadence_hz > 0 ? params.speed_mps / params.cadence_hz : 0.0;
  const double swing_amp = std::asin(std::clamp(stride / (2.0 * leg), 0.0, 0.9));
  const double knee_amp = 0.35 * swing_amp + 0.12 * std::min(1.0, params.speed_mps / 0.5);
  const double move = std::min(1.0, params.speed_mps / 0.5);

  SyntheticSequence seq;
  seq.params = params;
  const std::size_t n_frames =
      std::max<std::size_t>(1, std::size_t(params.duration_s * params.rate_hz + 0.5));
  seq.gt.reserve(n_frames);

  for (std::size_t f = 0; f < n_frames; ++f) {
    const double t = double(f) / params.rate_hz;
    const double osc = 2.0 * M_PI * params.cadence_hz * t;

    Skeleton3D s;
    s.timestamp = t;
    auto& c = s.coords;

    const Vec3 pelvis = kPelvisAnchor +
                        Vec3(kSwayAmp * move * std::sin(osc + params.sway_phase),
                             kBobAmp * move * std::sin(2.0 * osc), 0.0);
    c[kPelvis] = pelvis;
    c[kSpineMid] = pelvis + L[0] * kSpineDir;
    c[kNeck] = c[kSpineMid] + L[1] * kSpineDir;
    c[kLeftShoulder] = c[kNeck] + L[2] * kShoulderDirL;
    c[kRightShoulder] = c[kNeck] + L[3] * kShoulderDirR;
    c[kLeftWrist] = params.handles[0];
    c[kRightWrist] = params.handles[1];
    c[kLeftElbow] = two_link_elbow(c[kLeftShoulder], params.handles[0], L[4], L[6]);
    c[kRightElbow] = two_link_elbow(c[kRightShoulder], params.handles[1], L[5], L[7]);
    c[kLeftHip] = pelvis + L[8] * kHipDirL;
    c[kRightHip] = pelvis + L[9] * kHipDirR;

    auto leg_chain = [&](int hip, int knee, int heel, int toe, double phase,
                         double thigh, double shank, double foot) {
      const double theta = swing_amp * std::sin(osc + phase);
      const double gamma = knee_amp * 0.5 * (1.0 - std::cos(osc + phase));
      const double shank_angle = theta - gamma;
      c[knee] = c[hip] + thigh * Vec3(0, std::cos(theta), -std::sin(theta));
      c[heel] = c[knee] + shank * Vec3(0, std::cos(shank_angle), -std::sin(shank_angle));
      const double psi = kFootPitch + 0.3 * shank_angle;
      c[toe] = c[heel] + foot * Vec3(0, std::cos(psi), -std::sin(psi));
    };
    leg_chain(kLeftHip, kLeftKnee, kLeftHeel, kLeftToe, 0.0, L[10], L[12], L[14]);
    leg_chain(kRightHip, kRightKnee, kRightHeel, kRightToe, M_PI, L[11], L[13], L[15]);

    seq.gt.push_back(s);
  }
  return seq;
}

std::array<double, kKeypointCount> draw_body_offsets(std::uint64_t subject_seed) {
  std::array<double, kKeypointCount> out{};
  std::mt19937_64 rng(splitmix64(subject_seed ^ 0xB0D7B0D7B0D7B0D7ull));
  std::uniform_real_distribution<double> mag(0.010, 0.040);
  std::uniform_int_distribution<int> sign(0, 1);
  for (double& v : out) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return out;
}

void render_observations(SyntheticSequence& seq, const CameraRig& rig,
                         const NoiseModel& noise, std::uint64_t seed) {
  const Topology& topo = default_topology();
  const RigidTransform posture_to_gait = invert(rig.gait_to_posture);
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  seq.observations.assign(seq.gt.size(), {});
  for (std::size_t f = 0; f < seq.gt.size(); ++f) {
    for (int k = 0; k < kKeypointCount; ++k) {
      const CameraId cam_id = topo.camera_assignment[std::size_t(k)];
      const CameraIntrinsics& cam = cam_id == CameraId::posture ? rig.posture : rig.gait;
      Vec3 p = seq.gt[f].coords[std::size_t(k)];
      if (cam_id == CameraId::gait) p = apply_transform(posture_to_gait, p);
      if (!(p.z() > cam.depth_min && p.z() <= cam.depth_max)) {
        std::ostringstream msg;
        msg << "keypoint " << k << " frame " << f << ": depth " << p.z()
            << " outside camera range";
        throw OutOfFrustum(msg.str());
      }
      const Vec2 px = project(p, cam);
      if (!in_frame(px, cam)) {
        std::ostringstream msg;
        msg << "keypoint " << k << " frame " << f << ": pixel (" << px.x()
            << ", " << px.y() << ") outside the "
            << (cam_id == CameraId::posture ? "posture" : "gait") << " frame";
        throw OutOfFrustum(msg.str());
      }

      Observation& obs = seq.observations[f][std::size_t(k)];
      obs.camera = cam_id;
      Vec2 noisy = px;
      if (noise.pixel_sigma_px > 0)
        noisy += noise.pixel_sigma_px * Vec2(gauss(rng), gauss(rng));
      noisy.x() = std::clamp(noisy.x(), 0.0, cam.width - 1e-3);
      noisy.y() = std::clamp(noisy.y(), 0.0, cam.height - 1e-3);
      obs.pixel = noisy;

      double depth = p.z() + seq.body_offset_m[std::size_t(k)];
      if (noise.depth_sigma_m > 0) depth += noise.depth_sigma_m * gauss(rng);
      if (u01(rng) < noise.dead_pixel_rate) depth = 0.0;
      obs.depth_m = depth;
      obs.occluded = u01(rng) < noise.occlusion_rate;
    }
  }
}

std::vector<Skeleton2D> synthetic_detector(const SyntheticSequence& seq,
                                           const CameraRig& rig) {
  std::vector<Skeleton2D> out;
  out.reserve(seq.observations.size());
  std::array<Vec2, kKeypointCount> held{};
  std::array<double, kKeypointCount> held_depth{};
  bool first = true;
  for (std::size_t f = 0; f < seq.observations.size(); ++f) {
    Skeleton2D det;
    det.timestamp = seq.gt[f].timestamp;
    for (int k = 0; k < kKeypointCount; ++k) {
      const Observation& obs = seq.observations[f][std::size_t(k)];
      const Vec2 concat = to_concat_coords({obs.camera, obs.pixel}, rig.posture.height);
      if (first || !obs.occluded) {
        held[std::size_t(k)] = concat;
        held_depth[std::size_t(k)] = obs.depth_m;
      }
      det.coords[std::size_t(k)] = held[std::size_t(k)];
      det.depth_at_kp[std::size_t(k)] = held_depth[std::size_t(k)];
      det.confidence[std::size_t(k)] = obs.occluded ? 0.0 : 1.0;
    }
    first = false;
    out.push_back(det);
  }
  return out;
}

FramePair render_frame_pair(const SyntheticSequence& seq, std::size_t frame,
                            const CameraRig& rig) {
  FramePair fp = FramePair::blank(seq.gt.at(frame).timestamp);
  std::fill(fp.posture_rgb.begin(), fp.posture_rgb.end(), std::uint8_t(38));
  std::fill(fp.gait_rgb.begin(), fp.gait_rgb.end(), std::uint8_t(38));
  std::fill(fp.posture_depth.begin(), fp.posture_depth.end(), std::uint16_t(4000));
  std::fill(fp.gait_depth.begin(), fp.gait_depth.end(), std::uint16_t(4000));

  constexpr int kRadius = 5;
  for (const Observation& obs : seq.observations.at(frame)) {
    auto& rgb = obs.camera == CameraId::posture ? fp.posture_rgb : fp.gait_rgb;
    auto& depth = obs.camera == CameraId::posture ? fp.posture_depth : fp.gait_depth;
    const int cx = int(std::lround(obs.pixel.x()));
    const int cy = int(std::lround(obs.pixel.y()));
    const std::uint16_t mm =
        obs.depth_m > 0 ? std::uint16_t(std::lround(obs.depth_m * 1000.0)) : 0;
    for (int dy = -kRadius; dy <= kRadius; ++dy)
      for (int dx = -kRadius; dx <= kRadius; ++dx) {
        if (dx * dx + dy * dy > kRadius * kRadius) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || x >= kCamWidth || y < 0 || y >= kCamHeight) continue;
        const std::size_t at = std::size_t(y) * kCamWidth + x;
        rgb[3 * at] = rgb[3 * at + 1] = rgb[3 * at + 2] = 230;
        depth[at] = mm;
      }
  }
  return fp;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  Dataset ds;
  ds.rig = default_rig();

  auto linspace = [](double lo, double hi, int n, int i) {
    return n <= 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * double(i) / double(n - 1);
  };
  int id = 0;
  auto add_subjects = [&](int count, double lo, double hi, const char* split) {
    for (int i = 0; i < count; ++i, ++id) {
      Subject s;
      s.id = id;
      s.scale = linspace(lo, hi, count, i);
      s.split = split;
      s.seed = splitmix64(spec.seed ^ (0x5151515151515151ull + std::uint64_t(id)));
      ds.subjects.push_back(s);
    }
  };
  // validation/test statures sit inside the training range
  add_subjects(spec.n_train, 0.90, 1.10, "train");
  add_subjects(spec.n_val, 0.96, 1.04, "val");
  add_subjects(spec.n_test, 0.94, 1.06, "test");

  const std::array<double, 3> sway_phases = {0.0, 1.2, -1.2};
  for (const Subject& subj : ds.subjects) {
    const auto offsets = spec.noise.body_thickness
                             ? draw_body_offsets(subj.seed)
                             : std::array<double, kKeypointCount>{};
    int trial_no = 0;
    for (double speed : spec.speeds)
      for (int rep = 0; rep < spec.repeats; ++rep, ++trial_no) {
        GaitParams params = default_params(subj.scale, speed, subj.seed);
        params.duration_s = spec.duration_s;
        params.rate_hz = spec.rate_hz;
        params.noise = spec.noise;
        params.sway_phase = sway_phases[std::size_t(rep) % sway_phases.size()];
        params.seed = splitmix64(subj.seed + 0x7171717171717171ull * std::uint64_t(trial_no + 1));

        Trial trial;
        trial.subject = subj.id;
        trial.speed = speed;
        trial.repeat = rep;
        trial.seq = generate_sequence(params);
        trial.seq.body_offset_m = offsets;
        render_observations(trial.seq, ds.rig, spec.noise, params.seed);
        trial.detections = synthetic_detector(trial.seq, ds.rig);
        ds.trials.push_back(std::move(trial));
      }
  }
  return ds;
}

namespace {

std::string trial_basename(const Trial& t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "trial_s%.1f_r%d", t.speed, t.repeat);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  save_calibration(ds.rig, (fs::path(dir) / "calibration.json").string());

  nlohmann::json manifest;
  manifest["subjects"] = nlohmann::json::array();
  for (const Subject& s : ds.subjects)
    manifest["subjects"].push_back(
        {{"id", s.id}, {"scale", s.scale}, {"split", s.split}, {"seed", s.seed}});
  manifest["trials"] = nlohmann::json::array();

  for (const Trial& t : ds.trials) {
    char subj_dir[32];
    std::snprintf(subj_dir, sizeof(subj_dir), "subject_%02d", t.subject);
    fs::create_directories(fs::path(dir) / subj_dir);
    const std::string base = (fs::path(subj_dir) / trial_basename(t)).string();
    const std::string gt_path = base + "_gt3d.csv";
    const std::string det_path = base + "_det2d.csv";
    save_sequence_3d(t.seq.gt, (fs::path(dir) / gt_path).string());
    save_sequence_2d(t.detections, (fs::path(dir) / det_path).string());
    manifest["trials"].push_back({{"subject", t.subject},
                                  {"speed", t.speed},
                                  {"repeat", t.repeat},
                                  {"rate_hz", t.seq.params.rate_hz},
                                  {"gt3d", gt_path},
                                  {"det2d", det_path}});
  }
  std::ofstream out((fs::path(dir) / "manifest.json").string());
  if (!out) throw std::runtime_error("cannot write dataset manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.rig = load_calibration((fs::path(dir) / "calibration.json").string());
  std::ifstream in((fs::path(dir) / "manifest.json").string());
  if (!in) throw std::runtime_error("cannot open dataset manifest in " + dir);
  nlohmann::json manifest;
  in >> manifest;
  for (const auto& j : manifest.at("subjects")) {
    Subject s;
    s.id = j.at("id").get<int>();
    s.scale = j.at("scale").get<double>();
    s.split = j.at("split").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    ds.subjects.push_back(s);
  }
  for (const auto& j : manifest.at("trials")) {
    Trial t;
    t.subject = j.at("subject").get<int>();
    t.speed = j.at("speed").get<double>();
    t.repeat = j.at("repeat").get<int>();
    t.seq.params.rate_hz = j.at("rate_hz").get<double>();
    t.seq.gt = load_sequence_3d((fs::path(dir) / j.at("gt3d").get<std::string>()).string());
    t.detections = load_sequence_2d((fs::path(dir) / j.at("det2d").get<std::string>()).string());
    ds.trials.push_back(std::move(t));
  }
  return ds;
}

std::vector<LiftSample> build_lift_samples(const Dataset& ds,
                                           const std::string& split,
                                           LifterVariant variant,
                                           double target_hz) {
  const Topology& topo = default_topology();
  std::vector<LiftSample> out;
  for (const Trial& t : ds.trials) {
    const Subject& subj = ds.subjects.at(std::size_t(t.subject));
    if (subj.split != split) continue;
    std::vector<double> ts;
    ts.reserve(t.seq.gt.size());
    for (const auto& s : t.seq.gt) ts.push_back(s.timestamp);
    std::vector<std::size_t> idx;
    if (target_hz > 0 && target_hz < t.seq.params.rate_hz) {
      idx = downsample_sequence(ts, t.seq.params.rate_hz, target_hz);
    } else {
      idx.resize(ts.size());
      for (std::size_t i = 0; i < ts.size(); ++i) idx[i] = i;
    }
    for (std::size_t i : idx)
      out.push_back(make_lift_sample(t.detections.at(i), t.seq.gt.at(i), variant,
                                     ds.rig, topo));
  }
  return out;
}

}  // namespace wpose::synth
