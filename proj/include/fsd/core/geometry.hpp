#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>

namespace fsd {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// a - b wrapped into (-pi, pi].
double angle_diff(double a, double b);

Mat2 rotation(double psi);

/// Planar pose in the earth-fixed ENU frame (x east, y north, psi CCW from east).
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double psi{0.0};

  Pose2() = default;
  Pose2(double x_, double y_, double psi_) : x(x_), y(y_), psi(wrap_angle(psi_)) {}

  [[nodiscard]] Vec2 position() const { return {x, y}; }
};

/// Vehicle-frame velocities (x forward, y left) and yaw rate.
struct Twist2 {
  double vx{0.0};
  double vy{0.0};
  double r{0.0};
};

Vec2 vehicle_to_world(const Pose2& pose, const Vec2& point);
Vec2 world_to_vehicle(const Pose2& pose, const Vec2& point);

/// Rotates a vehicle-frame covariance into the world frame.
Mat2 rotate_covariance(double psi, const Mat2& cov);

}  // namespace fsd
