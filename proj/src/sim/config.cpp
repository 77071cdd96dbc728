#include "fsd/sim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fsd/core/error.hpp"

namespace fsd::sim {

namespace {

using Setter = std::function<void(SimConfig&, double)>;

template <typename T>
Setter field(T SimConfig::*member) {
  return [member](SimConfig& c, double v) { c.*member = static_cast<T>(v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["sim.control_dt"] = field(&SimConfig::control_dt);
    t["sim.physics_dt"] = field(&SimConfig::physics_dt);
    t["sim.offtrack_limit"] = field(&SimConfig::offtrack_limit);
    t["sim.stop_speed"] = field(&SimConfig::stop_speed);

    t["vehicle.mass"] = [](SimConfig& c, double v) { c.truth.mass = v; };
    t["vehicle.l_f"] = [](SimConfig& c, double v) { c.truth.l_f = v; };
    t["vehicle.l_r"] = [](SimConfig& c, double v) { c.truth.l_r = v; };
    t["vehicle.iz"] = [](SimConfig& c, double v) { c.truth.iz = v; };
    t["vehicle.axle_stiffness"] = [](SimConfig& c, double v) { c.truth.axle_stiffness = v; };
    t["vehicle.mu"] = [](SimConfig& c, double v) { c.truth.mu = v; };
    t["vehicle.drag"] = [](SimConfig& c, double v) { c.truth.drag = v; };
    t["vehicle.max_accel"] = [](SimConfig& c, double v) { c.truth.max_accel = v; };
    t["vehicle.speed_limit"] = [](SimConfig& c, double v) { c.truth.speed_limit = v; };

    t["actuator.delta_max"] = [](SimConfig& c, double v) { c.actuator.delta_max = v; };
    t["actuator.steer_full_time"] = [](SimConfig& c, double v) { c.actuator.steer_full_time = v; };
    t["actuator.latency_ticks"] = [](SimConfig& c, double v) { c.actuator.latency_ticks = static_cast<int>(v); };

    t["track.acceleration_width"] = [](SimConfig& c, double v) { c.track.acceleration_width = v; };
    t["track.circuit_width"] = [](SimConfig& c, double v) { c.track.circuit_width = v; };
    t["track.circuit_length"] = [](SimConfig& c, double v) { c.track.circuit_length = v; };
    t["track.min_radius"] = [](SimConfig& c, double v) { c.track.min_radius = v; };
    t["track.cone_spacing"] = [](SimConfig& c, double v) { c.track.cone_spacing = v; };

    t["sensors.gnss_pos_sigma"] = [](SimConfig& c, double v) { c.noise.gnss_pos = v; };
    t["sensors.gnss_heading_sigma_deg"] = [](SimConfig& c, double v) { c.noise.gnss_heading = v * kPi / 180.0; };
    t["sensors.gnss_vel_sigma"] = [](SimConfig& c, double v) { c.noise.gnss_vel = v; };
    t["sensors.gss_sigma"] = [](SimConfig& c, double v) { c.noise.gss_vel = v; };
    t["sensors.imu_accel_sigma"] = [](SimConfig& c, double v) { c.noise.imu_accel = v; };
    t["sensors.imu_gyro_sigma"] = [](SimConfig& c, double v) { c.noise.imu_gyro = v; };
    t["sensors.cone_bearing_sigma_deg"] = [](SimConfig& c, double v) { c.noise.cone_bearing = v * kPi / 180.0; };
    t["sensors.cone_range_sigma_at_20m"] = [](SimConfig& c, double v) { c.noise.cone_range_at_20 = v; };
    t["sensors.color_confusion"] = [](SimConfig& c, double v) { c.noise.color_confusion = v; };
    t["sensors.detection_range"] = [](SimConfig& c, double v) { c.noise.detection_range = v; };

    t["slam.particles"] = field(&SimConfig::slam_particles);
    t["slam.workers"] = field(&SimConfig::slam_workers);

    t["mpc.horizon"] = [](SimConfig& c, double v) { c.mpc.horizon = static_cast<int>(v); };
    t["mpc.max_iterations"] = [](SimConfig& c, double v) { c.mpc.max_iterations = static_cast<int>(v); };
    t["mpc.corridor"] = [](SimConfig& c, double v) { c.mpc.corridor = v; };
    t["mpc.q_D"] = [](SimConfig& c, double v) { c.mpc.weights.q_D = v; };
    t["mpc.q_phi"] = [](SimConfig& c, double v) { c.mpc.weights.q_phi = v; };
    t["mpc.q_vx"] = [](SimConfig& c, double v) { c.mpc.weights.q_vx = v; };
    t["mpc.q_p"] = [](SimConfig& c, double v) { c.mpc.weights.q_p = v; };
    t["mpc.q_s"] = [](SimConfig& c, double v) { c.mpc.weights.q_s = v; };
    t["mpc.q_d"] = [](SimConfig& c, double v) { c.mpc.weights.q_d = v; };
    t["mpc.q_cap"] = [](SimConfig& c, double v) { c.mpc.weights.q_cap = v; };
    t["mpc.c_speed"] = [](SimConfig& c, double v) { c.mpc.weights.c_speed = v; };

    t["mission.mapping_v_cap"] = field(&SimConfig::mapping_v_cap);
    t["mission.brake_distance"] = field(&SimConfig::brake_distance);
    const std::pair<const char*, MissionTuning SimConfig::*> tunings[] = {
        {"acceleration", &SimConfig::acceleration},
        {"skidpad", &SimConfig::skidpad},
        {"autocross", &SimConfig::autocross},
        {"trackdrive", &SimConfig::trackdrive},
    };
    for (const auto& [name, member] : tunings) {
      const std::string n(name);
      t["mission." + n + ".v_cap"] = [member](SimConfig& c, double v) { (c.*member).v_cap = v; };
      t["mission." + n + ".timeout"] = [member](SimConfig& c, double v) { (c.*member).timeout = v; };
      t["mission." + n + ".laps"] = [member](SimConfig& c, double v) { (c.*member).laps = static_cast<int>(v); };
    }
    t["telemetry.timing"] = [](SimConfig& c, double v) { c.telemetry_timing = v != 0.0; };
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_value(const std::string& key, const std::string& raw, int line) {
  if (raw == "true") return 1.0;
  if (raw == "false") return 0.0;
  if (raw == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": bad value for " + key + ": '" + raw + "'");
  }
  return v;
}

void validate(const SimConfig& c) {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::ConfigError, what);
  };
  require(c.control_dt > 0.0 && c.physics_dt > 0.0 && c.physics_dt <= c.control_dt, "time steps must be positive");
  require(c.truth.mass > 0.0 && c.truth.iz > 0.0, "vehicle mass and inertia must be positive");
  require(c.actuator.steer_full_time > 0.0, "steering rate limit must be positive");
  require(c.actuator.latency_ticks >= 0, "latency must be non-negative");
  require(c.track.circuit_width >= 2.5 && c.track.acceleration_width >= 2.5, "tracks must be at least 2.5 m wide");
  require(c.noise.color_confusion >= 0.0 && c.noise.color_confusion <= 1.0, "probabilities must lie in [0, 1]");
  require(c.noise.gnss_pos >= 0.0 && c.noise.gss_vel >= 0.0 && c.noise.imu_accel >= 0.0 && c.noise.imu_gyro >= 0.0 &&
              c.noise.cone_bearing >= 0.0 && c.noise.cone_range_at_20 >= 0.0,
          "noise sigmas must be non-negative");
  require(c.slam_particles >= 1, "at least one particle");
  require(c.mpc.horizon >= 1 && c.mpc.max_iterations >= 1, "MPC horizon and iterations must be positive");
}

}  // namespace

const MissionTuning& SimConfig::tuning(Mission m) const {
  switch (m) {
    case Mission::Acceleration: return acceleration;
    case Mission::Skidpad: return skidpad;
    case Mission::Autocross: return autocross;
    case Mission::Trackdrive: return trackdrive;
  }
  return acceleration;
}

SimConfig parse_config(const std::string& text, SimConfig base) {
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": bad section");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": expected key = value");
    const std::string key = (section.empty() ? "" : section + ".") + trim(s.substr(0, eq));
    const auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": unknown key " + key);
    it->second(base, parse_value(key, trim(s.substr(eq + 1)), line));
  }
  base.mpc.delta_max = base.actuator.delta_max;
  base.mpc.steer_full_time = base.actuator.steer_full_time;
  base.mpc.dt = base.control_dt;
  validate(base);
  return base;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace fsd::sim
