#include "fsd/perception/ground_plane.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "fsd/core/error.hpp"

namespace fsd::perception {

namespace {

bool plane_from_three(const Vec3& a, const Vec3& b, const Vec3& c, GroundPlane& out) {
  Vec3 n = (b - a).cross(c - a);
  const double norm = n.norm();
  const double scale = std::max({(b - a).norm(), (c - a).norm(), 1e-12});
  if (norm < 1e-9 * scale * scale) return false;
  n /= norm;
  if (n.z() < 0.0) n = -n;
  out.normal = n;
  out.offset = -n.dot(a);
  return true;
}

bool all_collinear(const std::vector<Vec3>& pts) {
  const Vec3& a = pts.front();
  std::size_t far = 0;
  double best = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = (pts[i] - a).norm();
    if (d > best) {
      best = d;
      far = i;
    }
  }
  if (best < 1e-12) return true;
  const Vec3 dir = (pts[far] - a) / best;
  for (const Vec3& p : pts) {
    if ((p - a).cross(dir).norm() > 1e-9 * std::max(1.0, best)) return false;
  }
  return true;
}

}  // namespace

GroundPlane fit_plane(const std::vector<Vec3>& points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateInput, "plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Eigen::MatrixXd a(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) a.row(i) = (points[i] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  Vec3 n = svd.matrixV().col(2).normalized();
  if (n.z() < 0.0) n = -n;
  GroundPlane plane;
  plane.normal = n;
  plane.offset = -n.dot(centroid);
  plane.inliers = static_cast<int>(points.size());
  return plane;
}

GroundPlane ransac_ground_plane(const std::vector<Vec3>& points, const RansacOptions& opts, RngStream& rng) {
  if (points.size() < 3 || all_collinear(points)) {
    throw Error(ErrorCode::DegenerateInput, "ground plane needs 3 non-collinear points");
  }

  const auto count_inliers = [&](const GroundPlane& pl) {
    int n = 0;
    for (const Vec3& p : points) n += std::abs(pl.distance(p)) <= opts.inlier_tol ? 1 : 0;
    return n;
  };

  GroundPlane best;
  best.inliers = -1;
  const std::size_t n = points.size();
  for (int it = 0; it < opts.iterations; ++it) {
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    std::size_t k = rng.index(n - 2);
    for (std::size_t skip : {std::min(i, j), std::max(i, j)}) {
      if (k >= skip) ++k;
    }
    GroundPlane cand;
    if (!plane_from_three(points[i], points[j], points[k], cand)) continue;
    cand.inliers = count_inliers(cand);
    if (cand.inliers > best.inliers) best = cand;
  }
  if (best.inliers < 0) {
    // Every sample was degenerate; fall back to a deterministic scan for a valid triple.
    for (std::size_t k = 2; k < n && best.inliers < 0; ++k) {
      GroundPlane cand;
      if (plane_from_three(points[0], points[1], points[k], cand)) {
        cand.inliers = count_inliers(cand);
        best = cand;
      }
    }
    if (best.inliers < 0) throw Error(ErrorCode::DegenerateInput, "no non-degenerate sample found");
  }

  if (static_cast<double>(best.inliers) < opts.min_inlier_ratio * static_cast<double>(n)) {
    throw Error(ErrorCode::NoConsensus, "inlier ratio below threshold");
  }

  std::vector<Vec3> inliers;
  inliers.reserve(best.inliers);
  for (const Vec3& p : points) {
    if (std::abs(best.distance(p)) <= opts.inlier_tol) inliers.push_back(p);
  }
  if (inliers.size() < 3) return best;
  GroundPlane refined = fit_plane(inliers);
  refined.inliers = count_inliers(refined);
  // Keep the refit only if it does not lose consensus.
  return refined.inliers >= best.inliers ? refined : best;
}

}  // namespace fsd::perception
