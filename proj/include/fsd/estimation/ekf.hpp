#pragma once

#include <Eigen/Core>
#include <variant>
#include <vector>

#include "fsd/core/geometry.hpp"

namespace fsd::est {

inline constexpr int kStateDim = 8;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;

// Index layout of the estimator state (X, Y, psi, v_x, v_y, r, a_x, a_y).
enum StateIndex : int { kX = 0, kY, kPsi, kVx, kVy, kR, kAx, kAy };

struct EkfState {
  StateVec mean{StateVec::Zero()};
  StateMat cov{StateMat::Identity()};
  double t{0.0};

  [[nodiscard]] Pose2 pose() const { return {mean[kX], mean[kY], mean[kPsi]}; }
  [[nodiscard]] Twist2 twist() const { return {mean[kVx], mean[kVy], mean[kR]}; }
};

struct SensorStatus {
  bool gnss_ok{true};
  bool gss_ok{true};
  bool imu_ok{true};
  double t{0.0};
};

enum class ProcessModelKind { RigidBody, KinematicBicycle };

struct BicycleParams {
  double l_f{0.765};
  double l_r{0.765};
  double relax_time{0.1};  // s, yaw rate / lateral velocity relaxation toward the kinematic values
};

// Measurement records. `cov` must be positive definite.
struct GnssPose {
  Eigen::Vector3d z;  // X, Y, psi
  Eigen::Matrix3d cov;
  double t{0.0};
};
struct GnssVel {
  Vec2 z;
  Mat2 cov;
  double t{0.0};
};
struct ImuAccel {
  Vec2 z;
  Mat2 cov;
  double t{0.0};
};
struct ImuYawRate {
  double z{0.0};
  double var{0.0};
  double t{0.0};
};
struct GssVel {
  Vec2 z;
  Mat2 cov;
  double t{0.0};
};

using Measurement = std::variant<GnssPose, GnssVel, ImuAccel, ImuYawRate, GssVel>;

enum class UpdateOutcome { Applied, Rejected };

struct UpdateResult {
  EkfState state;
  UpdateOutcome outcome{UpdateOutcome::Applied};
  double mahalanobis{0.0};  // squared
};

struct EkfConfig {
  /// Spectral densities of the process noise per state component.
  StateVec process_noise{(StateVec() << 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1.0, 4.0, 4.0).finished()};
  /// Additional spectral density applied to v_y and r in the kinematic fallback.
  double kinematic_noise{0.5};
  Vec2 gss_lever_arm{-0.8, 0.0};
  BicycleParams bicycle{};
  double gate_probability{0.999};
};

/// Continuous-time rigid-body model xdot = f(x).
StateVec rigid_body_derivative(const StateVec& x);
StateMat rigid_body_jacobian(const StateVec& x);

/// Kinematic bicycle fallback driven by the steering angle.
StateVec kinematic_derivative(const StateVec& x, double steering, const BicycleParams& p);
StateMat kinematic_jacobian(const StateVec& x, double steering, const BicycleParams& p);

/// One RK4 step of the mean; `jacobian` receives d x_next / d x when non-null.
StateVec propagate_mean(const StateVec& x, double dt, ProcessModelKind model, double steering,
                        const BicycleParams& p, StateMat* jacobian = nullptr);

EkfState predict(const EkfState& state, double dt, ProcessModelKind model, const StateVec& process_noise,
                 double steering = 0.0, const BicycleParams& bicycle = {});

/// Predicted measurement and its Jacobian for any measurement kind.
struct MeasurementModel {
  Eigen::VectorXd h;
  Eigen::MatrixXd H;
  Eigen::VectorXd z;
  Eigen::MatrixXd R;
  int angle_index{-1};  // component holding a heading residual, -1 if none
  double t{0.0};
};

MeasurementModel measurement_model(const StateVec& x, const Measurement& m, const Vec2& gss_lever_arm);

/// Predicted ground-speed-sensor reading v + r x p_gss.
Vec2 predicted_gss_velocity(const StateVec& x, const Vec2& lever_arm);

UpdateResult update(const EkfState& state, const Measurement& m, const Vec2& gss_lever_arm,
                    double gate_probability = 0.999);

bool uses_gnss(const Measurement& m);
bool uses_gss(const Measurement& m);
bool uses_imu(const Measurement& m);

struct StepResult {
  EkfState state;
  ProcessModelKind model{ProcessModelKind::RigidBody};
  int applied{0};
  int rejected{0};
};

/// Predict + sensor-status-dependent update ladder.
StepResult step(const EkfState& state, const SensorStatus& status, const std::vector<Measurement>& measurements,
                double dt, const EkfConfig& config, double steering = 0.0);

/// Max |P - P^T| and minimum eigenvalue of the covariance.
double asymmetry(const StateMat& p);
double min_eigenvalue(const StateMat& p);

}  // namespace fsd::est
