#pragma once

#include <optional>
#include <vector>

#include "fsd/core/random.hpp"
#include "fsd/estimation/ekf.hpp"
#include "fsd/perception/observations.hpp"
#include "fsd/sim/track.hpp"
#include "fsd/sim/world.hpp"
#include "fsd/slam/fastslam.hpp"

namespace fsd::sim {

struct Interval {
  double start{0.0};
  double end{0.0};

  [[nodiscard]] bool contains(double t) const { return t >= start && t < end; }
};

struct SensorNoise {
  double gnss_pos{0.02};
  double gnss_heading{0.2 * kPi / 180.0};
  double gnss_vel{0.05};
  double gss_vel{0.02};
  double imu_accel{0.05};
  double imu_gyro{0.005};
  double cone_bearing{0.5 * kPi / 180.0};
  double cone_range_at_20{0.4};  // range sigma grows quadratically, this value at 20 m
  double cone_range_min{0.01};
  double color_confusion{0.02};
  double detection_range{20.0};
  double min_range{1.0};
};

/// Failure timelines and noise for every sensor.
struct SensorSchedule {
  std::vector<Interval> gnss_outages;
  std::vector<Interval> gss_outages;
  std::vector<Interval> imu_outages;
  SensorNoise noise{};

  [[nodiscard]] bool gnss_ok(double t) const;
  [[nodiscard]] bool gss_ok(double t) const;
  [[nodiscard]] bool imu_ok(double t) const;
};

struct MeasurementBundle {
  double t{0.0};
  est::SensorStatus status;
  std::vector<est::Measurement> ekf;
  std::optional<slam::PoseFix> gnss_pose;
  std::vector<perception::PolarObservation> cones;
};

/// Range standard deviation of a cone at range r (stereo-like quadratic growth).
double cone_range_sigma(double r, const SensorNoise& n);

/// Samples every sensor that is up at time t.
MeasurementBundle sense(const TruthState& truth, const TrackDefinition& track, const SensorSchedule& schedule,
                        double t, RngStream& rng, const std::vector<perception::CameraModel>& cameras,
                        const Vec2& gss_lever_arm);

}  // namespace fsd::sim
