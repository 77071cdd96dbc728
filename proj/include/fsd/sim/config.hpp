#pragma once

#include <limits>
#include <string>
#include <vector>

#include "fsd/control/mpc.hpp"
#include "fsd/estimation/ekf.hpp"
#include "fsd/sim/sensors.hpp"
#include "fsd/sim/track.hpp"
#include "fsd/sim/world.hpp"

namespace fsd::sim {

struct MissionTuning {
  double v_cap{std::numeric_limits<double>::infinity()};
  double timeout{60.0};
  int laps{1};
};

/// Closed-loop MPC settings: warm-started, so a few SQP iterations per tick suffice.
inline control::MpcConfig default_mpc() {
  control::MpcConfig c;
  c.max_iterations = 5;
  return c;
}

/// Closed-loop estimator tuning. Throttle steps and the powertrain limiter make
/// the acceleration jump by ~10 m/s^2 within one tick; the default density would
/// gate those IMU samples out and lock the filter away from the measurements.
inline est::EkfConfig default_ekf() {
  est::EkfConfig c;
  c.process_noise << 1e-3, 1e-3, 1e-4, 0.5, 0.5, 4.0, 400.0, 400.0;
  return c;
}

struct SimConfig {
  double control_dt{0.05};
  double physics_dt{0.001};
  double offtrack_limit{1.5};  // abort when the car is this far from the centerline
  double stop_speed{0.3};      // a run ends once the car is slower than this past the finish
  TruthParams truth{};
  ActuatorModel actuator{};
  TrackOptions track{};
  SensorNoise noise{};
  est::EkfConfig ekf{default_ekf()};
  int slam_particles{500};
  unsigned slam_workers{1};
  control::MpcConfig mpc{default_mpc()};
  double mapping_v_cap{6.0};  // first lap of unknown circuits
  double brake_distance{8.0};  // braking zone offset from the finish of fixed courses
  MissionTuning acceleration{std::numeric_limits<double>::infinity(), 30.0, 1};
  MissionTuning skidpad{5.0, 90.0, 1};
  MissionTuning autocross{6.0, 90.0, 1};
  MissionTuning trackdrive{8.33, 150.0, 2};
  bool telemetry_timing{false};

  [[nodiscard]] const MissionTuning& tuning(Mission m) const;
};

/// Parses `key = value` lines. `[section]` headers prefix the following keys
/// with "section.". Unknown keys and malformed values throw ConfigError.
SimConfig parse_config(const std::string& text, SimConfig base = {});
SimConfig load_config(const std::string& path);

/// Every recognised key, for documentation and tests.
std::vector<std::string> config_keys();

}  // namespace fsd::sim
