#include "fsd/slam/mission_priors.hpp"

#include <fstream>
#include <json.hpp>

#include "fsd/core/error.hpp"

namespace fsd::slam {

std::string data_path(const std::string& name) { return std::string(FSD_DATA_DIR) + "/" + name; }

SkidpadLayout load_skidpad(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open skidpad layout " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("skidpad layout: ") + e.what());
  }
  SkidpadLayout s;
  s.inner_diameter = doc.at("inner_diameter").get<double>();
  s.outer_diameter = doc.at("outer_diameter").get<double>();
  s.center_distance = doc.at("center_distance").get<double>();
  s.entry_length = doc.at("entry_length").get<double>();
  s.exit_length = doc.at("exit_length").get<double>();
  s.laps_per_circle = doc.at("laps_per_circle").get<int>();
  s.cone_sigma = doc.at("cone_sigma").get<double>();
  for (const auto& c : doc.at("cones")) {
    s.cones.push_back({Vec2(c.at("x").get<double>(), c.at("y").get<double>()),
                       cone_color_from_string(c.at("color").get<std::string>())});
  }
  return s;
}

std::vector<Cone> acceleration_cones(double width, const AccelerationLayout& layout) {
  std::vector<Cone> cones;
  const double half = 0.5 * width;
  const auto steps = static_cast<int>(std::lround(layout.length / layout.spacing));
  for (int i = 0; i <= steps; ++i) {
    const double x = i * layout.spacing;
    const bool line = i == 0 || i == steps;
    cones.push_back({Vec2(x, half), line ? ConeColor::OrangeLarge : ConeColor::Blue});
    cones.push_back({Vec2(x, -half), line ? ConeColor::OrangeLarge : ConeColor::Yellow});
  }
  const auto braking = static_cast<int>(std::lround(layout.braking_length / layout.spacing));
  for (int i = 1; i <= braking; ++i) {
    const double x = layout.length + i * layout.spacing;
    cones.push_back({Vec2(x, half), ConeColor::OrangeSmall});
    cones.push_back({Vec2(x, -half), ConeColor::OrangeSmall});
  }
  return cones;
}

LandmarkMap landmarks_from_cones(const std::vector<Cone>& cones, double sigma, std::uint32_t seen) {
  LandmarkMap map;
  map.reserve(cones.size());
  for (const Cone& c : cones) {
    ConeLandmark lm;
    lm.mean = c.position;
    lm.cov = sigma * sigma * Mat2::Identity();
    lm.n_s = seen;
    lm.colors.add(c.color, seen);
    map.push_back(lm);
  }
  return map;
}

SlamConfig default_slam_config(Mission m) {
  SlamConfig cfg;
  cfg.w_nc = has_fixed_layout(m) ? 0.3 : 0.7;
  cfg.mode = SlamMode::Mapping;
  return cfg;
}

std::vector<Particle> init_mission(Mission m, const SlamConfig& cfg, const PriorConfig& prior, RngStream& rng,
                                   const Pose2& start) {
  std::vector<Particle> particles(static_cast<std::size_t>(cfg.particles));
  MapPtr shared;
  if (m == Mission::Skidpad) {
    const SkidpadLayout layout = load_skidpad();
    shared = std::make_shared<const LandmarkMap>(landmarks_from_cones(layout.cones, prior.cone_sigma, prior.prior_seen));
  } else if (m == Mission::Autocross || m == Mission::Trackdrive) {
    shared = std::make_shared<const LandmarkMap>();
  }

  for (Particle& p : particles) {
    if (m == Mission::Acceleration) {
      p.track_width = rng.uniform(prior.width_min, prior.width_max);
      p.map = std::make_shared<const LandmarkMap>(
          landmarks_from_cones(acceleration_cones(p.track_width, prior.acceleration), prior.cone_sigma,
                               prior.prior_seen));
    } else {
      p.map = shared;
    }
    const bool spread = has_fixed_layout(m);
    p.pose = spread ? Pose2(start.x + rng.normal(0.0, prior.pose_sigma_xy), start.y + rng.normal(0.0, prior.pose_sigma_xy),
                            start.psi + rng.normal(0.0, prior.pose_sigma_psi))
                    : start;
    p.log_weight = 0.0;
  }
  return particles;
}

}  // namespace fsd::slam
