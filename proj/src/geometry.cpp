#include "wpose/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wpose/skeleton.hpp"

namespace wpose {

namespace {
constexpr double kOrthoTol = 1e-9;
}

void CameraIntrinsics::validate(const std::string& label) const {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw CalibrationError(label + "." + field + ": " + why);
  };
  if (!(fx > 0)) fail("fx", "must be > 0");
  if (!(fy > 0)) fail("fy", "must be > 0");
  if (width <= 0) fail("width", "must be > 0");
  if (height <= 0) fail("height", "must be > 0");
  if (!(cx >= 0 && cx < width)) fail("cx", "must lie in [0, width)");
  if (!(cy >= 0 && cy < height)) fail("cy", "must lie in [0, height)");
  if (!(depth_min >= 0)) fail("depth_min", "must be >= 0");
  if (!(depth_max > depth_min)) fail("depth_max", "must be > depth_min");
}

void RigidTransform::validate(const std::string& label) const {
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > kOrthoTol)
    throw CalibrationError(label + ".rotation: not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > kOrthoTol)
    throw CalibrationError(label + ".rotation: determinant must be +1");
  if (!(scale > 0)) throw CalibrationError(label + ".scale: must be > 0");
}

void CameraRig::validate() const {
  posture.validate("posture");
  gait.validate("gait");
  gait_to_posture.validate("gait_to_posture");
  if (gait_to_posture.scale != 1.0)
    throw CalibrationError("gait_to_posture.scale: must be exactly 1");
}

Vec2 project(const Vec3& point, const CameraIntrinsics& cam) {
  if (!(point.z() > 0)) {
    std::ostringstream msg;
    msg << "point at z=" << point.z() << " is behind or on the camera plane";
    throw NonPositiveDepth(msg.str());
  }
  return {cam.fx * point.x() / point.z() + cam.cx,
          cam.fy * point.y() / point.z() + cam.cy};
}

Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& cam) {
  if (!std::isfinite(depth) || depth <= cam.depth_min || depth > cam.depth_max) {
    std::ostringstream msg;
    msg << "depth " << depth << " outside (" << cam.depth_min << ", "
        << cam.depth_max << "]";
    throw InvalidDepth(msg.str());
  }
  return {(pixel.x() - cam.cx) * depth / cam.fx,
          (pixel.y() - cam.cy) * depth / cam.fy, depth};
}

bool in_frame(const Vec2& pixel, const CameraIntrinsics& cam) {
  return pixel.x() >= 0 && pixel.x() < cam.width && pixel.y() >= 0 &&
         pixel.y() < cam.height;
}

Vec3 apply_transform(const RigidTransform& t, const Vec3& point) {
  return t.scale * (t.rotation * point) + t.translation;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.scale = a.scale * b.scale;
  out.translation = a.scale * (a.rotation * b.translation) + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.scale = 1.0 / t.scale;
  out.translation = -out.scale * (out.rotation * t.translation);
  return out;
}

RigidTransform procrustes_fit(const std::vector<Vec3>& source,
                              const std::vector<Vec3>& target,
                              bool with_scale) {
  const std::size_t n = source.size();
  if (n != target.size())
    throw DegenerateConfiguration("source/target point counts differ");
  if (n < 3) throw DegenerateConfiguration("need at least 3 points");

  Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= double(n);
  mu_t /= double(n);

  Mat3 cov = Mat3::Zero();
  double var_s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ds = source[i] - mu_s;
    const Vec3 dt = target[i] - mu_t;
    cov += dt * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= double(n);
  var_s /= double(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Source cloud must span at least a plane for a unique rotation.
  const double rank_tol = 1e-12 * std::max(sv(0), 1e-300);
  int rank = 0;
  for (int i = 0; i < 3; ++i)
    if (sv(i) > rank_tol) ++rank;
  if (rank < 2)
    throw DegenerateConfiguration(
        "point cloud covariance is rank-deficient (collinear or coincident points)");

  Vec3 d = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) d(2) = -1;

  RigidTransform out;
  out.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? (sv.dot(d) / var_s) : 1.0;
  out.translation = mu_t - out.scale * (out.rotation * mu_s);
  return out;
}

Skeleton3D align_skeleton_to_camera(const Skeleton3D& skel,
                                    const Mat3& imu_orientation,
                                    const std::array<Vec3, 2>& handle_offsets,
                                    const Topology& topo,
                                    CenteringAnchor anchor) {
  Vec3 center = Vec3::Zero();
  if (anchor == CenteringAnchor::centroid) {
    for (const Vec3& p : skel.coords) center += p;
    center /= double(kKeypointCount);
  } else {
    center = skel.coords[topo.root_index];
  }

  double spread = 0;
  for (const Vec3& p : skel.coords) spread += (p - center).squaredNorm();
  if (spread == 0)
    throw DegenerateSkeleton("all keypoints coincide");

  Skeleton3D out = skel;
  for (Vec3& p : out.coords) p = imu_orientation * (p - center);

  const Vec3 wrist_mid =
      0.5 * (out.coords[kLeftWrist] + out.coords[kRightWrist]);
  const Vec3 handle_mid = 0.5 * (handle_offsets[0] + handle_offsets[1]);
  const Vec3 shift = handle_mid - wrist_mid;
  for (Vec3& p : out.coords) p += shift;
  return out;
}

namespace {

using nlohmann::json;

CameraIntrinsics intrinsics_from_json(const json& j, const std::string& label) {
  for (const auto& [key, _] : j.items()) {
    if (key.rfind("dist", 0) == 0 || key == "k1" || key == "k2" || key == "k3" ||
        key == "p1" || key == "p2")
      throw CalibrationError(label + "." + key +
                             ": distortion fields are not supported (pinhole only)");
  }
  CameraIntrinsics cam;
  try {
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.depth_min = j.at("depth_min").get<double>();
    cam.depth_max = j.at("depth_max").get<double>();
  } catch (const json::exception& e) {
    throw CalibrationError(label + ": " + e.what());
  }
  cam.validate(label);
  return cam;
}

RigidTransform transform_from_json(const json& j, const std::string& label) {
  RigidTransform t;
  try {
    const auto rot = j.at("rotation");
    if (!rot.is_array() || rot.size() != 9)
      throw CalibrationError(label + ".rotation: expected 9 row-major numbers");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot.at(3 * r + c).get<double>();
    const auto tr = j.at("translation");
    if (!tr.is_array() || tr.size() != 3)
      throw CalibrationError(label + ".translation: expected 3 numbers");
    for (int i = 0; i < 3; ++i) t.translation(i) = tr.at(i).get<double>();
    t.scale = j.at("scale").get<double>();
  } catch (const json::exception& e) {
    throw CalibrationError(label + ": " + e.what());
  }
  t.validate(label);
  return t;
}

json intrinsics_to_json(const CameraIntrinsics& cam) {
  return json{{"fx", cam.fx},       {"fy", cam.fy},
              {"cx", cam.cx},       {"cy", cam.cy},
              {"width", cam.width}, {"height", cam.height},
              {"depth_min", cam.depth_min}, {"depth_max", cam.depth_max}};
}

}  // namespace

CameraRig load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("cannot open calibration file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CalibrationError(path + ": " + e.what());
  }
  CameraRig rig;
  if (!j.contains("posture")) throw CalibrationError("posture: missing");
  if (!j.contains("gait")) throw CalibrationError("gait: missing");
  if (!j.contains("gait_to_posture"))
    throw CalibrationError("gait_to_posture: missing");
  rig.posture = intrinsics_from_json(j["posture"], "posture");
  rig.gait = intrinsics_from_json(j["gait"], "gait");
  rig.gait_to_posture = transform_from_json(j["gait_to_posture"], "gait_to_posture");
  rig.validate();
  return rig;
}

void save_calibration(const CameraRig& rig, const std::string& path) {
  json j;
  j["posture"] = intrinsics_to_json(rig.posture);
  j["gait"] = intrinsics_to_json(rig.gait);
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[3 * r + c] = rig.gait_to_posture.rotation(r, c);
  j["gait_to_posture"] = {
      {"rotation", rot},
      {"translation", {rig.gait_to_posture.translation.x(),
                       rig.gait_to_posture.translation.y(),
                       rig.gait_to_posture.translation.z()}},
      {"scale", rig.gait_to_posture.scale}};
  std::ofstream out(path);
  if (!out) throw CalibrationError("cannot write calibration file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace wpose
