#include "fsd/sim/sensors.hpp"

#include <algorithm>
#include <cmath>

namespace fsd::sim {

namespace {

bool any_contains(const std::vector<Interval>& v, double t) {
  return std::any_of(v.begin(), v.end(), [t](const Interval& i) { return i.contains(t); });
}

ConeColor confused(ConeColor c, RngStream& rng, double p) {
  if (rng.uniform() >= p) return c;
  if (c == ConeColor::Blue) return ConeColor::Yellow;
  if (c == ConeColor::Yellow) return ConeColor::Blue;
  return ConeColor::Unknown;
}

}  // namespace

bool SensorSchedule::gnss_ok(double t) const { return !any_contains(gnss_outages, t); }
bool SensorSchedule::gss_ok(double t) const { return !any_contains(gss_outages, t); }
bool SensorSchedule::imu_ok(double t) const { return !any_contains(imu_outages, t); }

double cone_range_sigma(double r, const SensorNoise& n) {
  return std::max(n.cone_range_min, n.cone_range_at_20 * (r / 20.0) * (r / 20.0));
}

MeasurementBundle sense(const TruthState& truth, const TrackDefinition& track, const SensorSchedule& schedule,
                        double t, RngStream& rng, const std::vector<perception::CameraModel>& cameras,
                        const Vec2& gss_lever_arm) {
  const SensorNoise& n = schedule.noise;
  MeasurementBundle b;
  b.t = t;
  b.status = {schedule.gnss_ok(t), schedule.gss_ok(t), schedule.imu_ok(t), t};

  est::StateVec x = est::StateVec::Zero();
  x[est::kX] = truth.x;
  x[est::kY] = truth.y;
  x[est::kPsi] = truth.psi;
  x[est::kVx] = truth.vx;
  x[est::kVy] = truth.vy;
  x[est::kR] = truth.r;
  x[est::kAx] = truth.ax;
  x[est::kAy] = truth.ay;

  if (b.status.gnss_ok) {
    est::GnssPose g;
    g.z = Eigen::Vector3d(truth.x + rng.normal(0.0, n.gnss_pos), truth.y + rng.normal(0.0, n.gnss_pos),
                          wrap_angle(truth.psi + rng.normal(0.0, n.gnss_heading)));
    g.cov = Eigen::Vector3d(n.gnss_pos * n.gnss_pos, n.gnss_pos * n.gnss_pos, n.gnss_heading * n.gnss_heading)
                .asDiagonal();
    g.t = t;
    b.ekf.emplace_back(g);
    b.gnss_pose = slam::PoseFix{Pose2(g.z[0], g.z[1], g.z[2]), n.gnss_pos, n.gnss_pos, n.gnss_heading};

    est::GnssVel v;
    v.z = Vec2(truth.vx + rng.normal(0.0, n.gnss_vel), truth.vy + rng.normal(0.0, n.gnss_vel));
    v.cov = n.gnss_vel * n.gnss_vel * Mat2::Identity();
    v.t = t;
    b.ekf.emplace_back(v);
  }
  if (b.status.imu_ok) {
    est::ImuAccel a;
    a.z = Vec2(truth.ax + rng.normal(0.0, n.imu_accel), truth.ay + rng.normal(0.0, n.imu_accel));
    a.cov = n.imu_accel * n.imu_accel * Mat2::Identity();
    a.t = t;
    b.ekf.emplace_back(a);
    b.ekf.emplace_back(est::ImuYawRate{truth.r + rng.normal(0.0, n.imu_gyro), n.imu_gyro * n.imu_gyro, t});
  }
  if (b.status.gss_ok) {
    est::GssVel g;
    const Vec2 v = est::predicted_gss_velocity(x, gss_lever_arm);
    g.z = Vec2(v.x() + rng.normal(0.0, n.gss_vel), v.y() + rng.normal(0.0, n.gss_vel));
    g.cov = n.gss_vel * n.gss_vel * Mat2::Identity();
    g.t = t;
    b.ekf.emplace_back(g);
  }

  const Pose2 pose = truth.pose();
  for (const Cone& cone : track.cones) {
    const Vec2 local = world_to_vehicle(pose, cone.position);
    for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
      const perception::CameraModel& cam = cameras[ci];
      const Vec2 rel = local - cam.position.head<2>();
      const double range = rel.norm();
      if (range < n.min_range || range > n.detection_range) continue;
      const double bearing = std::atan2(rel.y(), rel.x());
      if (std::abs(angle_diff(bearing, cam.yaw)) > 0.5 * cam.hfov_deg * kPi / 180.0) continue;
      perception::PolarObservation z;
      z.range_sigma = cone_range_sigma(range, n);
      z.bearing_sigma = n.cone_bearing;
      z.range = std::max(0.1, range + rng.normal(0.0, z.range_sigma));
      z.bearing = wrap_angle(bearing + rng.normal(0.0, z.bearing_sigma));
      z.color = confused(cone.color, rng, n.color_confusion);
      z.camera_id = static_cast<int>(ci);
      b.cones.push_back(z);
    }
  }
  return b;
}

}  // namespace fsd::sim
