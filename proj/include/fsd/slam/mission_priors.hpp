#pragma once

#include <string>
#include <vector>

#include "fsd/core/cone.hpp"
#include "fsd/core/mission.hpp"
#include "fsd/slam/fastslam.hpp"

namespace fsd::slam {

/// Absolute path of a file in the shipped data directory.
std::string data_path(const std::string& name);

/// Figure-eight layout: crossing at the origin, right circle centred at -y.
struct SkidpadLayout {
  double inner_diameter{15.25};
  double outer_diameter{21.25};
  double center_distance{18.25};
  double entry_length{15.0};
  double exit_length{15.0};
  int laps_per_circle{2};
  double cone_sigma{0.05};
  std::vector<Cone> cones;

  [[nodiscard]] double centerline_radius() const { return 0.25 * (inner_diameter + outer_diameter); }
  [[nodiscard]] Vec2 right_center() const { return {0.0, -0.5 * center_distance}; }
  [[nodiscard]] Vec2 left_center() const { return {0.0, 0.5 * center_distance}; }
  [[nodiscard]] Pose2 start_pose() const { return {-entry_length, 0.0, 0.0}; }
};

SkidpadLayout load_skidpad(const std::string& path = data_path("skidpad.json"));

struct AccelerationLayout {
  double length{75.0};
  double spacing{5.0};
  double braking_length{30.0};
};

/// Straight corridor: big orange at start and finish, blue left, yellow right, small orange braking zone.
std::vector<Cone> acceleration_cones(double width, const AccelerationLayout& layout = {});

struct PriorConfig {
  double width_min{2.5};
  double width_max{4.0};
  double cone_sigma{0.05};
  std::uint32_t prior_seen{10};  // hardcoded cones start with this visibility count
  double pose_sigma_xy{0.1};
  double pose_sigma_psi{0.01};
  AccelerationLayout acceleration{};
};

/// w_nc and mode defaults per discipline.
SlamConfig default_slam_config(Mission m);

std::vector<Particle> init_mission(Mission m, const SlamConfig& cfg, const PriorConfig& prior, RngStream& rng,
                                   const Pose2& start = {});

LandmarkMap landmarks_from_cones(const std::vector<Cone>& cones, double sigma, std::uint32_t seen);

}  // namespace fsd::slam
