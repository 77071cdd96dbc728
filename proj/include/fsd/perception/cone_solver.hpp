#pragma once

#include <array>
#include <limits>
#include <vector>

#include "fsd/core/cone.hpp"
#include "fsd/core/geometry.hpp"

namespace fsd::perception {

/// Pinhole camera without distortion. Points are expressed in the
/// camera-aligned ground frame: origin on the ground below the optical
/// centre, x along the optical axis, y left, z up.
struct CameraModel {
  double fx{700.0};
  double fy{700.0};
  double cx{640.0};
  double cy{360.0};
  Vec3 position{0.0, 0.0, 1.0};  // vehicle frame, z is mounting height
  double yaw{0.0};               // optical axis heading in the vehicle frame
  double hfov_deg{65.0};

  template <typename T>
  [[nodiscard]] Eigen::Matrix<T, 2, 1> project(const Eigen::Matrix<T, 3, 1>& p) const {
    Eigen::Matrix<T, 2, 1> uv;
    uv[0] = T(cx) - T(fx) * p[1] / p[0];
    uv[1] = T(cy) - T(fy) * (p[2] - T(position.z())) / p[0];
    return uv;
  }

  [[nodiscard]] bool in_fov(const Vec3& p) const;

  /// Camera-ground frame to vehicle frame (planar part).
  [[nodiscard]] Vec2 to_vehicle(const Vec2& p) const;
  [[nodiscard]] Vec2 from_vehicle(const Vec2& p) const;
};

/// Silhouette keypoints of a cone: (lateral offset perpendicular to the line
/// of sight, height above ground).
struct ConeModel {
  std::vector<Vec2> keypoints;

  static ConeModel small_cone();
  static ConeModel large_cone();
};

struct ConeDetection {
  Eigen::Vector4d bbox{Eigen::Vector4d::Zero()};  // u_min, v_min, u_max, v_max
  std::vector<Vec2> keypoints;
  std::vector<Mat2> keypoint_cov;
  std::array<double, kConeColorCount> color_scores{};
  int camera_id{0};
  std::vector<double> depth_samples;
  std::size_t depth_midpoint{0};  // index of the sample at the box centre
};

struct SolverOptions {
  double lambda1{1.0};
  double lambda2{10.0};
  int max_iterations{50};
  double step_tol{1e-8};
  double initial_damping{1e-3};
};

struct ConeEstimate {
  Vec3 position{Vec3::Zero()};
  Mat3 cov{Mat3::Identity()};
  double initial_cost{0.0};
  double final_cost{0.0};
  int iterations{0};
};

inline constexpr double kNoDepth = std::numeric_limits<double>::quiet_NaN();

/// Weighted least-squares objective at cone position p. Pass kNoDepth when no depth is known.
double cone_cost(const ConeDetection& det, const ConeModel& model, const CameraModel& cam, double depth,
                 const SolverOptions& opts, const Vec3& p);
Vec3 cone_cost_gradient(const ConeDetection& det, const ConeModel& model, const CameraModel& cam, double depth,
                        const SolverOptions& opts, const Vec3& p);

/// Levenberg-Marquardt refinement. `initial` overrides the built-in initial guess when given.
ConeEstimate solve_cone_position(const ConeDetection& det, const ConeModel& model, const CameraModel& cam,
                                 double depth, const SolverOptions& opts = {}, const Vec3* initial = nullptr);

}  // namespace fsd::perception
