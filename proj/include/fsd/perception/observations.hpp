#pragma once

#include <vector>

#include "fsd/core/cone.hpp"
#include "fsd/core/random.hpp"
#include "fsd/perception/cone_solver.hpp"

namespace fsd::perception {

/// Cone observation handed to SLAM, vehicle frame.
struct ConeObservation {
  Vec2 position{Vec2::Zero()};
  Mat2 cov{Mat2::Identity()};
  ConeColor color{ConeColor::Unknown};
  int camera_id{0};
};

/// Range/bearing measurement relative to a camera's optical centre.
struct PolarObservation {
  double range{0.0};
  double bearing{0.0};  // vehicle-frame angle
  double range_sigma{0.1};
  double bearing_sigma{0.01};
  ConeColor color{ConeColor::Unknown};
  int camera_id{0};
};

ConeObservation to_cartesian(const PolarObservation& z, const CameraModel& cam);

/// Cone estimate in camera-ground coordinates to a vehicle-frame observation.
ConeObservation to_observation(const ConeEstimate& est, ConeColor color, const CameraModel& cam, int camera_id);

struct DedupOptions {
  double bearing_threshold{0.035};  // rad
  double merge_distance{1.0};       // m, same-bearing detections further apart stay distinct
  double min_separation{0.3};       // m
};

bool colors_compatible(ConeColor a, ConeColor b);

/// Merges detections of the same cone seen by overlapping cameras.
std::vector<ConeObservation> deduplicate(const std::vector<ConeObservation>& obs, const DedupOptions& opts = {});

/// Two 65 degree cameras yawed +-30 degrees, 125 degrees combined.
std::vector<CameraModel> default_camera_pair();

/// Synthetic keypoint detection of a cone located at `cone` (camera-ground frame).
/// `depth_samples` include background returns behind the cone.
ConeDetection render_detection(const Vec3& cone, ConeColor color, const ConeModel& model, const CameraModel& cam,
                               double pixel_sigma, RngStream& rng);

}  // namespace fsd::perception
