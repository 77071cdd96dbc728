#include "fsd/sim/track.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsd/core/error.hpp"
#include "fsd/planning/centerline.hpp"
#include "fsd/slam/mission_priors.hpp"

namespace fsd::sim {

namespace {

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const auto cross = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

bool self_intersects(const std::vector<Vec2>& loop) {
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(loop[i], loop[(i + 1) % n], loop[j], loop[(j + 1) % n])) return true;
    }
  }
  return false;
}

TrackDefinition acceleration_track(const TrackOptions& opt) {
  TrackDefinition t;
  t.mission = Mission::Acceleration;
  const slam::AccelerationLayout layout;
  t.cones = slam::acceleration_cones(opt.acceleration_width, layout);
  t.start = Pose2(0.0, 0.0, 0.0);
  const double half = 0.5 * opt.acceleration_width;
  t.finish = {Vec2(layout.length, half), Vec2(layout.length, -half)};
  const double end = layout.length + layout.braking_length;
  for (double x = 0.0; x <= end + 1e-9; x += 0.25) t.centerline.emplace_back(x, 0.0);
  t.width = opt.acceleration_width;
  return t;
}

TrackDefinition skidpad_track() {
  TrackDefinition t;
  t.mission = Mission::Skidpad;
  const slam::SkidpadLayout layout = slam::load_skidpad();
  t.cones = layout.cones;
  t.start = layout.start_pose();
  t.centerline = planning::hardcoded_centerline(Mission::Skidpad, 0.25).points;
  t.finish = {Vec2(0.0, 1.5), Vec2(0.0, -1.5)};
  t.width = 0.5 * (layout.outer_diameter - layout.inner_diameter);
  return t;
}

// Radial curve r(theta) = R0 (1 + sum a_k cos(k theta + phi_k)), counter-clockwise.
std::vector<Vec2> random_loop(RngStream& rng, const TrackOptions& opt) {
  const double r0 = opt.circuit_length / (2.0 * kPi);
  double amp[3];
  double phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = rng.uniform(-0.18, 0.18) / (k + 1);
    phase[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  std::vector<Vec2> loop;
  const int n = 720;
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * kPi * i / n;
    double r = 1.0;
    for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * th + phase[k]);
    loop.emplace_back(r0 * r * std::cos(th), r0 * r * std::sin(th));
  }
  return loop;
}

// Resamples a closed loop at uniform arc length, starting at loop[0].
std::vector<Vec2> resample_closed(const std::vector<Vec2>& loop, double spacing) {
  std::vector<double> s{0.0};
  for (std::size_t i = 1; i <= loop.size(); ++i) s.push_back(s.back() + (loop[i % loop.size()] - loop[i - 1]).norm());
  const double total = s.back();
  const int n = std::max(3, static_cast<int>(std::lround(total / spacing)));
  std::vector<Vec2> out;
  std::size_t seg = 0;
  for (int i = 0; i < n; ++i) {
    const double target = total * i / n;
    while (s[seg + 1] < target) ++seg;
    const double f = (target - s[seg]) / (s[seg + 1] - s[seg]);
    out.push_back(loop[seg] + f * (loop[(seg + 1) % loop.size()] - loop[seg]));
  }
  return out;
}

TrackDefinition circuit_track(Mission m, RngStream& rng, const TrackOptions& opt) {
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    const std::vector<Vec2> raw = random_loop(rng, opt);
    const std::vector<Vec2> dense = resample_closed(raw, 0.25);
    if (min_turn_radius(resample_closed(raw, 2.0)) < opt.min_radius) continue;

    const double half = 0.5 * opt.circuit_width;
    const std::vector<Vec2> stations = resample_closed(dense, opt.cone_spacing);
    std::vector<Vec2> left;
    std::vector<Vec2> right;
    for (std::size_t i = 0; i < stations.size(); ++i) {
      const Vec2 tangent = (stations[(i + 1) % stations.size()] - stations[(i + stations.size() - 1) % stations.size()])
                               .normalized();
      const Vec2 normal(-tangent.y(), tangent.x());
      left.push_back(stations[i] + half * normal);
      right.push_back(stations[i] - half * normal);
    }
    if (self_intersects(left) || self_intersects(right)) continue;

    TrackDefinition t;
    t.mission = m;
    t.closed = true;
    t.width = opt.circuit_width;
    for (std::size_t i = 0; i < stations.size(); ++i) {
      const bool line = i == 0;
      t.cones.push_back({left[i], line ? ConeColor::OrangeLarge : ConeColor::Blue});
      t.cones.push_back({right[i], line ? ConeColor::OrangeLarge : ConeColor::Yellow});
    }
    t.finish = {left[0], right[0]};
    t.lap_length = polyline_length(dense) + (dense.front() - dense.back()).norm();

    // Ground-truth centerline starts start_offset behind the line and covers one lap past it.
    const Vec2 tangent0 = (dense[1] - dense.back()).normalized();
    const Vec2 start_pos = dense[0] - opt.start_offset * tangent0;
    t.start = Pose2(start_pos.x(), start_pos.y(), std::atan2(tangent0.y(), tangent0.x()));
    t.centerline.push_back(start_pos);
    t.centerline.insert(t.centerline.end(), dense.begin(), dense.end());
    t.centerline.push_back(dense.front());
    return t;
  }
  throw Error(ErrorCode::GenerationFailed, "no admissible circuit after retries");
}

}  // namespace

double polyline_length(const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
  return s;
}

double distance_to_polyline(const std::vector<Vec2>& pts, const Vec2& p) {
  if (pts.empty()) return std::numeric_limits<double>::infinity();
  if (pts.size() == 1) return (pts[0] - p).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 ab = pts[i] - pts[i - 1];
    const double len2 = ab.squaredNorm();
    const double f = len2 > 0.0 ? std::clamp((p - pts[i - 1]).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (pts[i - 1] + f * ab - p).squaredNorm());
  }
  return std::sqrt(best);
}

double min_turn_radius(const std::vector<Vec2>& pts) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = pts[(i + n - 1) % n];
    const Vec2& b = pts[i];
    const Vec2& c = pts[(i + 1) % n];
    const double area2 = std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
    if (area2 < 1e-12) continue;
    best = std::min(best, (b - a).norm() * (c - b).norm() * (c - a).norm() / (2.0 * area2));
  }
  return best;
}

TrackDefinition generate_track(Mission m, RngStream& rng, const TrackOptions& opt) {
  switch (m) {
    case Mission::Acceleration: return acceleration_track(opt);
    case Mission::Skidpad: return skidpad_track();
    case Mission::Autocross:
    case Mission::Trackdrive: return circuit_track(m, rng, opt);
  }
  throw Error(ErrorCode::UnknownMission, "unknown mission");
}

}  // namespace fsd::sim
