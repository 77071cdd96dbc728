#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsd/core/mission.hpp"
#include "fsd/sim/config.hpp"
#include "fsd/sim/sensors.hpp"

namespace fsd::sim {

struct MissionConfig {
  Mission mission{Mission::Acceleration};
  std::uint64_t seed{1};
  SimConfig sim{};
  std::vector<Interval> gnss_outages;
  std::vector<Interval> gss_outages;
  std::string out_dir;  // empty: no files written
  double max_time{0.0};  // > 0 stops the run early without completing it
};

struct MissionResult {
  bool completed{false};
  std::string reason;
  std::vector<double> lap_times;
  double max_corridor_violation{0.0};
  double peak_speed{0.0};
  double last_lap_pose_rms{0.0};
  double distance{0.0};
  std::size_t ticks{0};
  std::string telemetry_path;
  std::string map_path;
  std::vector<std::pair<double, double>> width_trace;  // (t, weighted track width), acceleration only
};

/// Closed loop at the control rate: sense, estimate, perceive, map, plan,
/// solve, actuate. Ends on completion, timeout, off-track or a terminal
/// sensor fault. Identical config and seed give identical telemetry.
MissionResult run_mission(const MissionConfig& cfg);

}  // namespace fsd::sim
