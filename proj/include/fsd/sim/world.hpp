#pragma once

#include "fsd/core/geometry.hpp"

namespace fsd::sim {

/// Ground-truth vehicle. Deliberately independent of the controller's model:
/// saturating tyres, aerodynamic drag and a powertrain speed limiter.
struct TruthParams {
  double mass{190.0};
  double l_f{0.78};
  double l_r{0.75};
  double iz{105.0};
  double axle_stiffness{10500.0};  // N/rad, small-slip slope per axle
  double mu{1.5};
  double drag{0.6};                // N/(m/s)^2
  double max_accel{10.0};          // at D = 100
  double speed_limit{13.5};        // m/s, drive force fades to zero here
  double limiter_band{0.7};        // m/s over which the drive force fades
  double brake_fade_speed{0.3};
  double kinematic_tau{0.02};      // s, low-speed relaxation to the kinematic yaw rate
  double blend_low{3.0};
  double blend_high{6.0};

  [[nodiscard]] double wheelbase() const { return l_f + l_r; }
};

struct ActuatorModel {
  double delta_max{0.4};
  double steer_full_time{0.4};  // s from full left to full right
  int latency_ticks{0};

  [[nodiscard]] double steer_rate() const { return 2.0 * delta_max / steer_full_time; }
};

struct TruthState {
  double x{0.0};
  double y{0.0};
  double psi{0.0};
  double vx{0.0};
  double vy{0.0};
  double r{0.0};
  double delta{0.0};  // actual steering angle
  double D{0.0};      // actual throttle, percent
  double ax{0.0};     // body-frame specific acceleration (IMU)
  double ay{0.0};

  [[nodiscard]] Pose2 pose() const { return {x, y, psi}; }
};

struct ControlCommand {
  double delta{0.0};
  double D{0.0};
};

struct TruthDerivative {
  double x, y, psi, vx, vy, r;
};

double truth_drive_force(double D, double vx, const TruthParams& p);
TruthDerivative truth_derivative(const TruthState& s, const TruthParams& p);

/// One physics step: steering moves toward the command at the rate limit,
/// then RK4 over dt.
TruthState physics_step(const TruthState& s, const ControlCommand& cmd, double dt, const TruthParams& p,
                        const ActuatorModel& a);

/// Holds `cmd` for `tick` seconds, integrating with `physics_dt` substeps.
TruthState step_world(const TruthState& s, const ControlCommand& cmd, double tick, const TruthParams& p,
                      const ActuatorModel& a, double physics_dt = 0.001);

}  // namespace fsd::sim
