#pragma once

#include <utility>
#include <vector>

#include "fsd/core/cone.hpp"
#include "fsd/core/mission.hpp"
#include "fsd/core/random.hpp"

namespace fsd::sim {

struct TrackOptions {
  double acceleration_width{3.2};
  double circuit_width{3.5};
  double circuit_length{200.0};  // approximate lap length of random circuits
  double min_radius{9.0};        // centerline curvature bound
  double cone_spacing{4.0};
  double start_offset{4.0};      // start pose distance behind the start line
  int max_attempts{50};
};

struct TrackDefinition {
  Mission mission{Mission::Acceleration};
  std::vector<Cone> cones;
  Pose2 start;
  std::pair<Vec2, Vec2> finish;
  std::vector<Vec2> centerline;  // ground truth, dense, in driving order
  bool closed{false};
  double lap_length{0.0};        // closed circuits: length of one lap from the start line
  double width{0.0};
};

/// Acceleration: straight 75 m plus braking zone. Skidpad: shipped layout.
/// Autocross/Trackdrive: random closed circuit, identical for identical seeds.
/// Throws GenerationFailed when no admissible circuit is found.
TrackDefinition generate_track(Mission m, RngStream& rng, const TrackOptions& opt = {});

/// Polyline arc length.
double polyline_length(const std::vector<Vec2>& pts);

/// Distance from p to the nearest segment of the polyline.
double distance_to_polyline(const std::vector<Vec2>& pts, const Vec2& p);

/// Smallest radius of curvature along a closed polyline (three-point circles).
double min_turn_radius(const std::vector<Vec2>& closed_pts);

}  // namespace fsd::sim
