#include "fsd/perception/observations.hpp"

#include <algorithm>
#include <numeric>

namespace fsd::perception {

ConeObservation to_cartesian(const PolarObservation& z, const CameraModel& cam) {
  const double c = std::cos(z.bearing);
  const double s = std::sin(z.bearing);
  ConeObservation o;
  o.position = cam.position.head<2>() + z.range * Vec2(c, s);
  Mat2 j;
  j << c, -z.range * s, s, z.range * c;
  const Mat2 d = Vec2(z.range_sigma * z.range_sigma, z.bearing_sigma * z.bearing_sigma).asDiagonal();
  o.cov = j * d * j.transpose();
  o.color = z.color;
  o.camera_id = z.camera_id;
  return o;
}

ConeObservation to_observation(const ConeEstimate& est, ConeColor color, const CameraModel& cam, int camera_id) {
  ConeObservation o;
  o.position = cam.to_vehicle(est.position.head<2>());
  o.cov = rotate_covariance(cam.yaw, est.cov.topLeftCorner<2, 2>());
  o.color = color;
  o.camera_id = camera_id;
  return o;
}

bool colors_compatible(ConeColor a, ConeColor b) {
  return a == b || a == ConeColor::Unknown || b == ConeColor::Unknown;
}

std::vector<ConeObservation> deduplicate(const std::vector<ConeObservation>& obs, const DedupOptions& opts) {
  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return obs[a].cov.trace() < obs[b].cov.trace(); });

  std::vector<std::size_t> kept;
  std::vector<ConeColor> colors(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) colors[i] = obs[i].color;

  for (std::size_t idx : order) {
    const ConeObservation& o = obs[idx];
    const double bearing = std::atan2(o.position.y(), o.position.x());
    bool merged = false;
    for (std::size_t k : kept) {
      const ConeObservation& ref = obs[k];
      const double dist = (ref.position - o.position).norm();
      const double ref_bearing = std::atan2(ref.position.y(), ref.position.x());
      const bool same_ray = std::abs(angle_diff(bearing, ref_bearing)) < opts.bearing_threshold &&
                            colors_compatible(colors[k], o.color) && dist < opts.merge_distance;
      if (same_ray || dist < opts.min_separation) {
        if (colors[k] == ConeColor::Unknown) colors[k] = o.color;
        merged = true;
        break;
      }
    }
    if (!merged) kept.push_back(idx);
  }

  std::sort(kept.begin(), kept.end());
  std::vector<ConeObservation> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) {
    out.push_back(obs[k]);
    out.back().color = colors[k];
  }
  return out;
}

std::vector<CameraModel> default_camera_pair() {
  const double half_fov = 32.5 * kPi / 180.0;
  CameraModel left;
  left.fx = left.fy = 640.0 / std::tan(half_fov);
  left.cx = 640.0;
  left.cy = 360.0;
  left.hfov_deg = 65.0;
  CameraModel right = left;
  left.position = Vec3(0.0, 0.1, 1.0);
  left.yaw = 30.0 * kPi / 180.0;
  right.position = Vec3(0.0, -0.1, 1.0);
  right.yaw = -30.0 * kPi / 180.0;
  return {left, right};
}

ConeDetection render_detection(const Vec3& cone, ConeColor color, const ConeModel& model, const CameraModel& cam,
                               double pixel_sigma, RngStream& rng) {
  ConeDetection det;
  const double planar = cone.head<2>().norm();
  const Vec2 n(-cone.y() / planar, cone.x() / planar);
  const double var = std::max(pixel_sigma, 0.5) * std::max(pixel_sigma, 0.5);
  double u_min = std::numeric_limits<double>::infinity();
  double v_min = u_min;
  double u_max = -u_min;
  double v_max = -u_min;
  for (const Vec2& k : model.keypoints) {
    const Vec3 q(cone.x() + k.x() * n.x(), cone.y() + k.x() * n.y(), cone.z() + k.y());
    Vec2 uv = cam.project<double>(q);
    if (pixel_sigma > 0.0) uv += Vec2(rng.normal(0.0, pixel_sigma), rng.normal(0.0, pixel_sigma));
    det.keypoints.push_back(uv);
    det.keypoint_cov.push_back(var * Mat2::Identity());
    u_min = std::min(u_min, uv.x());
    u_max = std::max(u_max, uv.x());
    v_min = std::min(v_min, uv.y());
    v_max = std::max(v_max, uv.y());
  }
  det.bbox << u_min, v_min, u_max, v_max;
  det.color_scores[static_cast<std::size_t>(color)] = 1.0;

  // Stereo-like depth returns: cone surface plus a few background pixels.
  const double sigma_d = 0.4 * (cone.x() / 20.0) * (cone.x() / 20.0);
  for (int i = 0; i < 8; ++i) det.depth_samples.push_back(cone.x() + rng.normal(0.0, std::max(sigma_d, 1e-3)));
  for (int i = 0; i < 3; ++i) det.depth_samples.push_back(cone.x() + 4.0 + 2.0 * i + rng.uniform(0.0, 0.5));
  det.depth_midpoint = 0;
  return det;
}

}  // namespace fsd::perception
