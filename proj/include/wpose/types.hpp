#pragma once

#include <Eigen/Core>

namespace wpose {

inline constexpr int kKeypointCount = 17;
inline constexpr int kConnectionCount = 16;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

}  // namespace wpose
