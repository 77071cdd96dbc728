#pragma once

#include <vector>

#include "fsd/core/geometry.hpp"
#include "fsd/core/random.hpp"

namespace fsd::perception {

/// Plane n.p + offset = 0 with unit normal pointing to +z.
struct GroundPlane {
  Vec3 normal{Vec3::UnitZ()};
  double offset{0.0};
  int inliers{0};

  [[nodiscard]] double distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

struct RansacOptions {
  int iterations{200};
  double inlier_tol{0.03};
  double min_inlier_ratio{0.2};
};

GroundPlane ransac_ground_plane(const std::vector<Vec3>& points, const RansacOptions& opts, RngStream& rng);

/// Least-squares plane through the given points (smallest singular direction).
GroundPlane fit_plane(const std::vector<Vec3>& points);

}  // namespace fsd::perception
