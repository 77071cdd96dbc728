#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fsd/core/error.hpp"
#include "fsd/core/random.hpp"
#include "fsd/perception/observations.hpp"
#include "fsd/sim/config.hpp"
#include "fsd/sim/mission.hpp"
#include "fsd/sim/sensors.hpp"
#include "fsd/sim/telemetry.hpp"
#include "fsd/sim/track.hpp"
#include "fsd/sim/world.hpp"

using namespace fsd;
using namespace fsd::sim;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fsd_test_sim_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

template <typename F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("acceleration track is a 75 m straight corridor") {
  RngStream rng(1, 0);
  const TrackDefinition t = generate_track(Mission::Acceleration, rng);
  CHECK(!t.closed);
  CHECK(t.finish.first.x() == doctest::Approx(75.0));
  CHECK(t.finish.second.x() == doctest::Approx(75.0));
  CHECK((t.finish.first - t.finish.second).norm() == doctest::Approx(3.2));
  CHECK(t.width == doctest::Approx(3.2));
  for (const Cone& c : t.cones) {
    if (c.position.x() > 0.0 && c.position.x() < 75.0) CHECK(std::abs(std::abs(c.position.y()) - 1.6) < 1e-9);
  }
}

TEST_CASE("skidpad is two circles forming an eight") {
  RngStream rng(1, 0);
  const TrackDefinition t = generate_track(Mission::Skidpad, rng);
  int left = 0;
  int right = 0;
  for (const Vec2& p : t.centerline) {
    if (p.y() > 5.0) ++left;
    if (p.y() < -5.0) ++right;
  }
  CHECK(left > 0);
  CHECK(right > 0);
  // Both loops pass through the crossing at the origin.
  double nearest = 1e9;
  for (const Vec2& p : t.centerline) nearest = std::min(nearest, p.norm());
  CHECK(nearest < 0.5);
}

TEST_CASE("random circuits are reproducible and admissible") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream a(seed, 0);
    RngStream b(seed, 0);
    const TrackDefinition ta = generate_track(Mission::Autocross, a);
    const TrackDefinition tb = generate_track(Mission::Autocross, b);
    REQUIRE(ta.cones.size() == tb.cones.size());
    for (std::size_t i = 0; i < ta.cones.size(); ++i) {
      CHECK(ta.cones[i].position == tb.cones[i].position);
      CHECK(ta.cones[i].color == tb.cones[i].color);
    }
    CHECK(ta.closed);
    CHECK(min_turn_radius(ta.centerline) >= TrackOptions{}.min_radius * 0.95);
    // Corridor at least 2.5 m wide: every cone keeps half that from the centerline.
    for (const Cone& c : ta.cones) CHECK(distance_to_polyline(ta.centerline, c.position) >= 1.25);
  }
}

TEST_CASE("zero command from rest stays put") {
  const TruthState s0;
  const TruthState s = step_world(s0, {0.0, 0.0}, 2.0, TruthParams{}, ActuatorModel{});
  CHECK(s.x == 0.0);
  CHECK(s.y == 0.0);
  CHECK(s.vx == 0.0);
  CHECK(s.psi == 0.0);
}

TEST_CASE("full steering sweep takes 0.4 s") {
  const ActuatorModel act;
  TruthState s;
  s.delta = -act.delta_max;
  TruthState mid = step_world(s, {act.delta_max, 0.0}, 0.39, TruthParams{}, act);
  CHECK(mid.delta < act.delta_max - 1e-3);
  TruthState end = step_world(s, {act.delta_max, 0.0}, 0.4, TruthParams{}, act);
  CHECK(end.delta == doctest::Approx(act.delta_max).epsilon(1e-9));
  // Steering never exceeds the mechanical limit.
  end = step_world(end, {2.0, 0.0}, 0.2, TruthParams{}, act);
  CHECK(end.delta <= act.delta_max);
}

TEST_CASE("full throttle reaches 40-50 km/h within 75 m") {
  TruthState s;
  double t = 0.0;
  while (s.x < 75.0 && t < 30.0) {
    s = step_world(s, {0.0, 100.0}, 0.05, TruthParams{}, ActuatorModel{});
    t += 0.05;
  }
  const double kmh = s.vx * 3.6;
  MESSAGE("speed at 75 m: " << kmh << " km/h after " << t << " s");
  CHECK(kmh >= 40.0);
  CHECK(kmh <= 50.0);
}

TEST_CASE("negative throttle decelerates and does not reverse") {
  TruthState s;
  s.vx = 10.0;
  s = step_world(s, {0.0, -100.0}, 3.0, TruthParams{}, ActuatorModel{});
  CHECK(s.vx >= 0.0);
  CHECK(s.vx < 0.5);
}

TEST_CASE("cone range noise grows quadratically") {
  const SensorNoise n;
  CHECK(cone_range_sigma(20.0, n) == doctest::Approx(0.4));
  CHECK(cone_range_sigma(10.0, n) == doctest::Approx(0.1));
  CHECK(cone_range_sigma(0.5, n) == doctest::Approx(n.cone_range_min));

  // Empirical spread of a cone straight ahead at 20 m.
  TrackDefinition track;
  track.cones.push_back({Vec2(20.0, 0.0), ConeColor::Blue});
  const std::vector<perception::CameraModel> cams{perception::CameraModel{}};
  SensorSchedule sch;
  RngStream rng(501, 0);
  double sum = 0.0;
  double sq = 0.0;
  int count = 0;
  for (int i = 0; i < 20000; ++i) {
    const MeasurementBundle b = sense(TruthState{}, track, sch, 0.0, rng, cams, Vec2::Zero());
    REQUIRE(b.cones.size() == 1);
    sum += b.cones[0].range;
    sq += b.cones[0].range * b.cones[0].range;
    ++count;
  }
  const double mean = sum / count;
  const double sd = std::sqrt(sq / count - mean * mean);
  CHECK(mean == doctest::Approx(20.0).epsilon(0.002));
  CHECK(sd == doctest::Approx(0.4).epsilon(0.03));
}

TEST_CASE("sensors respect field of view and the schedule") {
  TrackDefinition track;
  track.cones.push_back({Vec2(-5.0, 0.0), ConeColor::Yellow});  // behind
  track.cones.push_back({Vec2(30.0, 0.0), ConeColor::Yellow});  // out of range
  track.cones.push_back({Vec2(8.0, 1.0), ConeColor::Yellow});
  const auto cams = perception::default_camera_pair();
  SensorSchedule sch;
  sch.gnss_outages = {{1.0, 2.0}};
  sch.gss_outages = {{1.5, 1.6}};
  RngStream rng(502, 0);
  for (int k = 0; k < 60; ++k) {
    const double t = 0.05 * k;
    const MeasurementBundle b = sense(TruthState{}, track, sch, t, rng, cams, Vec2::Zero());
    const bool gnss = std::any_of(b.ekf.begin(), b.ekf.end(), [](const est::Measurement& m) {
      return std::holds_alternative<est::GnssPose>(m) || std::holds_alternative<est::GnssVel>(m);
    });
    const bool gss = std::any_of(b.ekf.begin(), b.ekf.end(),
                                 [](const est::Measurement& m) { return std::holds_alternative<est::GssVel>(m); });
    const bool gnss_up = !(t >= 1.0 && t < 2.0);
    const bool gss_up = !(t >= 1.5 && t < 1.6);
    CHECK(gnss == gnss_up);
    CHECK(b.gnss_pose.has_value() == gnss_up);
    CHECK(b.status.gnss_ok == gnss_up);
    CHECK(gss == gss_up);
    for (const auto& z : b.cones) {
      CHECK(std::abs(z.bearing) < kPi / 2);
      CHECK(z.range < 20.0 + 3.0);
    }
    CHECK(!b.cones.empty());
  }
}

TEST_CASE("config parsing") {
  const SimConfig base;
  const SimConfig c = parse_config("[sim]\nofftrack_limit = 2.5 # comment\n[slam]\nparticles = 50\n");
  CHECK(c.offtrack_limit == 2.5);
  CHECK(c.slam_particles == 50);
  CHECK(c.physics_dt == base.physics_dt);
  const SimConfig shipped = load_config(std::string(FSD_DATA_DIR) + "/default.cfg");
  CHECK(shipped.slam_particles == base.slam_particles);
  CHECK(shipped.truth.speed_limit == base.truth.speed_limit);
  CHECK(!config_keys().empty());
  expect_code(ErrorCode::ConfigError, [] { (void)parse_config("[sim]\nno_such_key = 1\n"); });
  expect_code(ErrorCode::ConfigError, [] { (void)parse_config("[sim]\ncontrol_dt = fast\n"); });
  expect_code(ErrorCode::ConfigError, [] { (void)parse_config("garbage line\n"); });
  expect_code(ErrorCode::ConfigError, [] { (void)load_config("/nonexistent.cfg"); });
}

TEST_CASE("telemetry header and rows") {
  CHECK(telemetry_header() ==
        "t,X_true,Y_true,psi_true,vx_true,vy_true,r_true,X_est,Y_est,psi_est,vx_est,vy_est,r_est,n_eff,map_size,"
        "centerline_len,delta_cmd,D_cmd,slack_max,solve_ms,corridor_violation_m");
  const auto dir = scratch_dir("telemetry");
  const std::string path = (dir / "t.csv").string();
  {
    TelemetryWriter w(path);
    TelemetryRecord r;
    r.values[0] = 0.0;
    w.write(r);
    r.values[0] = 0.05;
    r.values[4] = 3.0;
    w.write(r);
    CHECK_THROWS(w.write(r));
    CHECK(w.rows() == 2);
  }
  const auto rows = read_telemetry(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].values[4] == 3.0);
  std::ofstream(dir / "bad.csv") << "t,x\n0,1\n";
  expect_code(ErrorCode::ConfigError, [&] { (void)read_telemetry((dir / "bad.csv").string()); });
}

TEST_CASE("mission runs are deterministic and continuous") {
  const auto dir = scratch_dir("determinism");
  MissionConfig cfg;
  cfg.mission = Mission::Skidpad;
  cfg.seed = 7;
  cfg.max_time = 4.0;
  cfg.out_dir = (dir / "a").string();
  const MissionResult a = run_mission(cfg);
  cfg.out_dir = (dir / "b").string();
  const MissionResult b = run_mission(cfg);
  const std::string ta = slurp(a.telemetry_path);
  CHECK(!ta.empty());
  CHECK(ta == slurp(b.telemetry_path));

  const auto rows = read_telemetry(a.telemetry_path);
  CHECK(rows.size() == a.ticks);
  double v_max = 0.0;
  for (const auto& r : rows) v_max = std::max(v_max, std::hypot(r.values[4], r.values[5]));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double dt = rows[i].values[0] - rows[i - 1].values[0];
    CHECK(dt > 0.0);
    const double step = std::hypot(rows[i].values[1] - rows[i - 1].values[1], rows[i].values[2] - rows[i - 1].values[2]);
    CHECK(step <= v_max * dt + 1e-6);
  }

  // A different seed changes the sensor noise and hence the telemetry.
  cfg.seed = 8;
  cfg.out_dir = (dir / "c").string();
  const MissionResult c = run_mission(cfg);
  CHECK(slurp(c.telemetry_path) != ta);
}
