#include "fsd/sim/mission.hpp"

#include <chrono>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>

#include "fsd/control/mpc.hpp"
#include "fsd/core/error.hpp"
#include "fsd/estimation/ekf.hpp"
#include "fsd/planning/centerline.hpp"
#include "fsd/slam/fastslam.hpp"
#include "fsd/slam/mission_priors.hpp"
#include "fsd/sim/telemetry.hpp"
#include "fsd/sim/track.hpp"
#include "fsd/sim/world.hpp"

namespace fsd::sim {

namespace {

using control::CenterlineSpline;

std::vector<Cone> mapped_cones(const slam::LandmarkMap& map) {
  std::vector<Cone> cones;
  for (const slam::ConeLandmark& lm : map) {
    if (lm.n_s < 2) continue;
    // Colors without a clear majority are passed on as unknown.
    const ConeColor c = lm.colors.most_likely();
    cones.push_back({lm.mean, lm.colors.probability(c) >= 0.75 ? c : ConeColor::Unknown});
  }
  return cones;
}

est::EkfState initial_estimate(const Pose2& start) {
  est::EkfState s;
  s.mean[est::kX] = start.x;
  s.mean[est::kY] = start.y;
  s.mean[est::kPsi] = start.psi;
  s.cov = est::StateVec(0.01, 0.01, 1e-4, 0.01, 0.01, 0.01, 0.1, 0.1).asDiagonal();
  return s;
}

// Route the controller follows on a mission with a fixed layout.
std::vector<Vec2> fixed_route(Mission m, const TrackDefinition& track) {
  if (m == Mission::Acceleration) return track.centerline;
  return planning::hardcoded_centerline(m, 0.25).points;
}

// Unrolls a closed gate loop (first == last centre) for the remaining laps plus a run-out.
std::vector<Vec2> unrolled_route(const Vec2& start, const std::vector<Vec2>& loop, int laps, double runout) {
  std::vector<Vec2> pts{start};
  for (int lap = 0; lap < laps; ++lap) {
    pts.insert(pts.end(), loop.begin() + (lap == 0 ? 0 : 1), loop.end());
  }
  double s = 0.0;
  for (std::size_t i = 1; i < loop.size() && s < runout; ++i) {
    s += (loop[i] - loop[i - 1]).norm();
    pts.push_back(loop[i]);
  }
  return pts;
}

std::vector<Vec2> without_duplicates(const std::vector<Vec2>& pts) {
  std::vector<Vec2> out;
  for (const Vec2& p : pts) {
    if (out.empty() || (p - out.back()).norm() > 0.05) out.push_back(p);
  }
  return out;
}

}  // namespace

MissionResult run_mission(const MissionConfig& mc) {
  const SimConfig& sc = mc.sim;
  const MissionTuning& tuning = sc.tuning(mc.mission);
  const bool fixed = has_fixed_layout(mc.mission);

  RngStream root(mc.seed, 0);
  RngStream track_rng = root.derive(1);
  RngStream sensor_rng = root.derive(2);
  RngStream slam_rng = root.derive(3);
  RngStream prior_rng = root.derive(4);

  const TrackDefinition track = generate_track(mc.mission, track_rng, sc.track);

  SensorSchedule schedule;
  schedule.gnss_outages = mc.gnss_outages;
  schedule.gss_outages = mc.gss_outages;
  schedule.noise = sc.noise;
  const std::vector<perception::CameraModel> cameras = perception::default_camera_pair();

  slam::SlamConfig slam_cfg = slam::default_slam_config(mc.mission);
  slam_cfg.particles = sc.slam_particles;
  slam_cfg.workers = sc.slam_workers;
  slam_cfg.sensor_range = sc.noise.detection_range;
  slam::PriorConfig prior;
  slam::FastSlam slam(slam_cfg, slam::init_mission(mc.mission, slam_cfg, prior, prior_rng, track.start),
                      slam_rng.derive(1));

  control::MpcConfig mpc_cfg = sc.mpc;
  control::MpcSolver mpc(mpc_cfg);

  // Route and braking zone.
  CenterlineSpline spline;
  double finish_progress = std::numeric_limits<double>::infinity();
  std::optional<planning::CenterlineSearch> search;
  std::size_t committed = 0;
  bool route_closed = false;
  if (fixed) {
    spline = CenterlineSpline::resampled(fixed_route(mc.mission, track), 2.0);
    finish_progress = mc.mission == Mission::Acceleration ? slam::AccelerationLayout{}.length
                                                         : spline.length() - sc.brake_distance;
    // Acceleration brakes in the run-out past the finish line.
    mpc.config().brake_start =
        mc.mission == Mission::Acceleration ? finish_progress + sc.brake_distance : finish_progress;
  } else {
    search.emplace(track.start);
  }

  MissionResult result;
  std::unique_ptr<TelemetryWriter> telemetry;
  if (!mc.out_dir.empty()) {
    std::filesystem::create_directories(mc.out_dir);
    result.telemetry_path = (std::filesystem::path(mc.out_dir) / "telemetry.csv").string();
    result.map_path = (std::filesystem::path(mc.out_dir) / "map.json").string();
    telemetry = std::make_unique<TelemetryWriter>(result.telemetry_path);
  }

  TruthState truth;
  truth.x = track.start.x;
  truth.y = track.start.y;
  truth.psi = track.start.psi;
  est::EkfState ekf = initial_estimate(track.start);
  std::deque<ControlCommand> pending(static_cast<std::size_t>(sc.actuator.latency_ticks), ControlCommand{});
  ControlCommand command;
  double progress = 0.0;
  double last_D = 0.0;
  const Vec2 line_center = 0.5 * (track.finish.first + track.finish.second);
  slam::LapDetector laps(line_center);
  double last_lap_time = 0.0;
  double lap_sq = 0.0;
  std::size_t lap_n = 0;
  bool finished = false;  // final line crossed, now braking
  const double limit = mc.max_time > 0.0 ? std::min(mc.max_time, tuning.timeout) : tuning.timeout;

  for (std::size_t tick = 1;; ++tick) {
    const double t = static_cast<double>(tick) * sc.control_dt;
    pending.push_back(command);
    const ControlCommand applied = pending.front();
    pending.pop_front();
    const TruthState before = truth;
    truth = step_world(truth, applied, sc.control_dt, sc.truth, sc.actuator, sc.physics_dt);
    result.distance += std::hypot(truth.x - before.x, truth.y - before.y);
    result.peak_speed = std::max(result.peak_speed, truth.vx);
    result.ticks = tick;

    // Estimation.
    const MeasurementBundle bundle = sense(truth, track, schedule, t, sensor_rng, cameras, sc.ekf.gss_lever_arm);
    try {
      ekf = est::step(ekf, bundle.status, bundle.ekf, sc.control_dt, sc.ekf, truth.delta).state;
    } catch (const Error& e) {
      result.reason = e.what();
      break;
    }
    const Twist2 twist{ekf.mean[est::kVx], ekf.mean[est::kVy], ekf.mean[est::kR]};

    std::vector<perception::ConeObservation> obs;
    obs.reserve(bundle.cones.size());
    for (const perception::PolarObservation& z : bundle.cones) {
      obs.push_back(perception::to_cartesian(z, cameras[static_cast<std::size_t>(z.camera_id)]));
    }
    obs = perception::deduplicate(obs);
    slam.predict(twist, sc.control_dt);
    const slam::TickStats stats = slam.update(obs, bundle.gnss_pose);
    const Pose2 pose = slam.pose();
    if (mc.mission == Mission::Acceleration) result.width_trace.emplace_back(t, slam.track_width());

    // Laps on circuits; the map is frozen after the first lap.
    if (!fixed && laps.update(pose.position())) {
      result.lap_times.push_back(t - last_lap_time);
      last_lap_time = t;
      if (laps.laps() == 1 && tuning.laps > 1 && !slam.frozen()) slam.freeze_map();
      if (lap_n > 0) result.last_lap_pose_rms = std::sqrt(lap_sq / static_cast<double>(lap_n));
      lap_sq = 0.0;
      lap_n = 0;
      if (laps.laps() >= tuning.laps) finished = true;
    }
    if (!fixed && !finished) {
      lap_sq += (pose.x - truth.x) * (pose.x - truth.x) + (pose.y - truth.y) * (pose.y - truth.y);
      ++lap_n;
    }

    // Centerline on unknown circuits: grow during the first lap, then the unrolled loop.
    if (search && !route_closed) {
      search->extend(mapped_cones(slam.best_map()), pose.position());
      const planning::CenterlinePath& path = search->path();
      if (path.complete) {
        route_closed = true;
        const std::vector<Vec2> loop = without_duplicates(path.points);
        const std::vector<Vec2> route = without_duplicates(unrolled_route(track.start.position(), loop, tuning.laps, 20.0));
        spline = CenterlineSpline::through(route);
        double loop_len = 0.0;
        for (std::size_t i = 1; i < loop.size(); ++i) loop_len += (loop[i] - loop[i - 1]).norm();
        finish_progress = (loop.front() - track.start.position()).norm() + tuning.laps * loop_len;
        mpc.config().brake_start = finish_progress;
      } else if (path.points.size() != committed && !path.points.empty()) {
        std::vector<Vec2> route{track.start.position()};
        route.insert(route.end(), path.points.begin(), path.points.end());
        route = without_duplicates(route);
        if (route.size() >= 2) spline = CenterlineSpline::through(route);
      }
      committed = path.points.size();
    }

    // Control.
    control::MpcResult sol;
    double solve_ms = 0.0;
    if (!spline.empty()) {
      mpc.config().v_cap = (!fixed && laps.laps() == 0) ? std::min(sc.mapping_v_cap, tuning.v_cap) : tuning.v_cap;
      progress = control::project_progress(spline, pose.position(), progress, 5.0);
      control::MpcState x0;
      x0 << pose.x, pose.y, twist.vx, twist.vy, pose.psi, twist.r, progress, truth.delta, last_D;
      const auto t0 = std::chrono::steady_clock::now();
      sol = mpc.solve(x0, spline);
      if (sc.telemetry_timing) {
        solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      command = {sol.delta_cmd, sol.D_cmd};
      last_D = sol.D_cmd;
    } else {
      command = {0.0, 0.0};
    }
    if (fixed && !finished && progress >= finish_progress) {
      finished = true;
      result.lap_times.push_back(t);
    }

    const double offset = distance_to_polyline(track.centerline, Vec2(truth.x, truth.y));
    const double violation = std::max(0.0, offset - mpc_cfg.corridor);
    result.max_corridor_violation = std::max(result.max_corridor_violation, violation);

    if (telemetry) {
      TelemetryRecord row;
      row.values = {t,
                    truth.x,
                    truth.y,
                    truth.psi,
                    truth.vx,
                    truth.vy,
                    truth.r,
                    pose.x,
                    pose.y,
                    pose.psi,
                    twist.vx,
                    twist.vy,
                    twist.r,
                    stats.n_eff,
                    static_cast<double>(stats.map_size),
                    search ? search->path().length() : spline.length(),
                    command.delta,
                    command.D,
                    sol.slack_max,
                    solve_ms,
                    violation};
      telemetry->write(row);
    }

    if (offset > sc.offtrack_limit) {
      result.reason = "off track";
      break;
    }
    if (finished && truth.vx < sc.stop_speed) {
      result.completed = true;
      result.reason = "completed";
      break;
    }
    if (t >= limit - 1e-9) {
      result.reason = mc.max_time > 0.0 && mc.max_time < tuning.timeout ? "time limit" : "timeout";
      break;
    }
  }

  if (telemetry) {
    telemetry->flush();
    write_map_json(result.map_path, slam.best_map());
  }
  return result;
}

}  // namespace fsd::sim
