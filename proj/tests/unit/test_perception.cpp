#include <doctest.h>

#include <cmath>
#include <vector>

#include "fsd/core/error.hpp"
#include "fsd/core/random.hpp"
#include "fsd/perception/cone_solver.hpp"
#include "fsd/perception/depth_cluster.hpp"
#include "fsd/perception/ground_plane.hpp"
#include "fsd/perception/observations.hpp"

using namespace fsd;
using namespace fsd::perception;

namespace {

template <typename F>
void expect_error(ErrorCode code, F f) {
  try {
    f();
    FAIL("expected error " << to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

std::vector<Vec3> noisy_plane(RngStream& rng, int n, double sigma, double outlier_ratio) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < outlier_ratio) {
      pts.emplace_back(rng.uniform(0, 20), rng.uniform(-10, 10), rng.uniform(0.1, 3.0));
    } else {
      pts.emplace_back(rng.uniform(0, 20), rng.uniform(-10, 10), rng.normal(0.0, sigma));
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("RANSAC recovers a noisy ground plane with outliers") {
  RngStream rng(1, 0);
  const auto pts = noisy_plane(rng, 500, 0.01, 0.1);
  RngStream sampler(2, 0);
  const GroundPlane g = ransac_ground_plane(pts, {}, sampler);
  CHECK(std::abs(g.normal.norm() - 1.0) < 1e-9);
  const double angle = std::acos(std::min(1.0, g.normal.dot(Vec3::UnitZ())));
  CHECK(angle < 0.5 * kPi / 180.0);
  CHECK(g.inliers >= 400);
}

TEST_CASE("RANSAC on an exact plane keeps every point") {
  RngStream rng(3, 0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(0, 10);
    const double y = rng.uniform(-5, 5);
    pts.emplace_back(x, y, 0.1 * x - 0.05 * y + 0.3);
  }
  RngStream sampler(4, 0);
  const GroundPlane g = ransac_ground_plane(pts, {}, sampler);
  CHECK(g.inliers == 100);
  for (const Vec3& p : pts) CHECK(std::abs(g.distance(p)) < 1e-9);
}

TEST_CASE("plane through three points") {
  const std::vector<Vec3> pts{{0, 0, 1}, {1, 0, 1}, {0, 1, 2}};
  RngStream rng(5, 0);
  const GroundPlane g = ransac_ground_plane(pts, {}, rng);
  CHECK(g.inliers == 3);
  for (const Vec3& p : pts) CHECK(std::abs(g.distance(p)) < 1e-12);
  CHECK(g.normal.z() > 0.0);
}

TEST_CASE("RANSAC errors and determinism") {
  RngStream rng(6, 0);
  expect_error(ErrorCode::DegenerateInput, [&] {
    (void)ransac_ground_plane({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}}, {}, rng);
  });

  // Scattered points: no plane holds 20% of them.
  RngStream cloud(7, 0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(cloud.uniform(-10, 10), cloud.uniform(-10, 10), cloud.uniform(-10, 10));
  expect_error(ErrorCode::NoConsensus, [&] { (void)ransac_ground_plane(pts, {}, rng); });

  RngStream data(8, 0);
  const auto plane = noisy_plane(data, 300, 0.02, 0.3);
  RngStream a(9, 1);
  RngStream b(9, 1);
  const GroundPlane ga = ransac_ground_plane(plane, {}, a);
  const GroundPlane gb = ransac_ground_plane(plane, {}, b);
  CHECK(ga.normal == gb.normal);
  CHECK(ga.offset == gb.offset);
  CHECK(ga.inliers == gb.inliers);
}

TEST_CASE("cluster_depth examples") {
  CHECK(cluster_depth({10.0, 10.1, 9.9, 25.0, 25.1}, 0) == doctest::Approx(10.0));
  CHECK(cluster_depth({10.0, 10.1, 9.9, 25.0, 25.1}, 4) == doctest::Approx(25.05));
  CHECK(cluster_depth({7.3}, 0) == 7.3);
  CHECK(cluster_depth({12.0, 12.0, 12.0, 12.0}, 2) == 12.0);
  // Single linkage chains samples whose neighbours are within the gap.
  CHECK(cluster_depth({5.0, 5.4, 5.8, 6.2, 9.0}, 0) == doctest::Approx(5.6));
  expect_error(ErrorCode::EmptyDepth, [] { (void)cluster_depth({}, 0); });
}

TEST_CASE("cone solver recovers a noiseless cone exactly") {
  const CameraModel cam;
  const ConeModel model = ConeModel::small_cone();
  RngStream rng(10, 0);
  const Vec3 truth(10.0, 2.0, 0.0);
  const ConeDetection det = render_detection(truth, ConeColor::Blue, model, cam, 0.0, rng);
  const ConeEstimate est = solve_cone_position(det, model, cam, 10.0);
  CHECK((est.position - truth).norm() < 1e-6);
  CHECK(est.final_cost <= est.initial_cost);
}

TEST_CASE("depth term weight is lambda1 / x^2") {
  const CameraModel cam;
  const ConeModel model = ConeModel::small_cone();
  RngStream rng(11, 0);
  const Vec3 truth(10.0, 0.0, 0.0);
  const ConeDetection det = render_detection(truth, ConeColor::Blue, model, cam, 0.0, rng);
  SolverOptions o;
  o.lambda1 = 1.0;
  o.lambda2 = 0.0;
  // Keypoint residuals vanish at the truth, so the cost is the depth term only.
  const double c = cone_cost(det, model, cam, 11.0, o, truth);
  CHECK(c == doctest::Approx(0.01 * 1.0 * 1.0));
  const double c2 = cone_cost(det, model, cam, 13.0, o, truth);
  CHECK(c2 == doctest::Approx(0.01 * 3.0 * 3.0));
}

TEST_CASE("cone cost gradient matches central differences") {
  const CameraModel cam;
  const ConeModel model = ConeModel::large_cone();
  RngStream rng(12, 0);
  const SolverOptions o;
  for (int i = 0; i < 50; ++i) {
    const Vec3 truth(rng.uniform(4, 25), rng.uniform(-6, 6), 0.0);
    const ConeDetection det = render_detection(truth, ConeColor::Yellow, model, cam, 1.0, rng);
    const double depth = truth.x() + rng.normal(0.0, 0.2);
    const Vec3 p = truth + Vec3(rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.1));
    const Vec3 g = cone_cost_gradient(det, model, cam, depth, o, p);
    Vec3 fd;
    for (int k = 0; k < 3; ++k) {
      Vec3 a = p;
      Vec3 b = p;
      a[k] += 1e-6;
      b[k] -= 1e-6;
      fd[k] = (cone_cost(det, model, cam, depth, o, a) - cone_cost(det, model, cam, depth, o, b)) / 2e-6;
    }
    CHECK((g - fd).norm() / std::max(1.0, fd.norm()) < 1e-5);
  }
}

TEST_CASE("cone solver improves the objective and clamps to the ground") {
  const CameraModel cam;
  const ConeModel model = ConeModel::small_cone();
  RngStream rng(13, 0);
  const Vec3 truth(12.0, -3.0, 0.0);
  const ConeDetection det = render_detection(truth, ConeColor::Blue, model, cam, 2.0, rng);
  const Vec3 init(14.0, -2.0, 0.5);
  double last_z = std::numeric_limits<double>::infinity();
  for (double l2 : {0.0, 1.0, 10.0, 100.0, 1e4, 1e6, 1e8}) {
    SolverOptions o;
    o.lambda2 = l2;
    const ConeEstimate est = solve_cone_position(det, model, cam, 12.0, o, &init);
    CHECK(est.final_cost <= cone_cost(det, model, cam, 12.0, o, init));
    CHECK(std::abs(est.position.z()) <= last_z + 1e-12);
    last_z = std::abs(est.position.z());
  }
  CHECK(last_z < 1e-3);
}

TEST_CASE("cone solver covariance is consistent with Monte-Carlo scatter") {
  const CameraModel cam;
  const ConeModel model = ConeModel::large_cone();
  const Vec3 truth(15.0, 3.0, 0.0);
  RngStream rng(14, 0);
  Vec3 sq = Vec3::Zero();
  Vec3 reported = Vec3::Zero();
  constexpr int kTrials = 200;
  for (int i = 0; i < kTrials; ++i) {
    const ConeDetection det = render_detection(truth, ConeColor::Blue, model, cam, 1.0, rng);
    const ConeEstimate est = solve_cone_position(det, model, cam, kNoDepth);
    sq += (est.position - truth).cwiseAbs2();
    reported += est.cov.diagonal() / kTrials;
  }
  const Vec3 empirical = sq / kTrials;
  for (int k = 0; k < 2; ++k) {
    const double ratio = std::sqrt(empirical[k] / reported[k]);
    MESSAGE("axis " << k << " RMS / reported sigma " << ratio);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }
}

TEST_CASE("cone solver errors") {
  const CameraModel cam;
  const ConeModel model = ConeModel::small_cone();
  RngStream rng(15, 0);
  ConeDetection det = render_detection({10, 0, 0}, ConeColor::Blue, model, cam, 0.0, rng);
  det.keypoints.resize(1);
  det.keypoint_cov.resize(1);
  CHECK_THROWS_AS((void)solve_cone_position(det, model, cam, kNoDepth), std::invalid_argument);
}

TEST_CASE("deduplicate merges overlapping camera views") {
  const auto cams = default_camera_pair();
  // A cone straight ahead lies in both camera views.
  const Vec3 cone_vehicle(10.0, 0.0, 0.0);
  std::vector<ConeObservation> obs;
  RngStream rng(16, 0);
  for (int id = 0; id < 2; ++id) {
    const Vec2 local = cams[id].from_vehicle(cone_vehicle.head<2>());
    CHECK(cams[id].in_fov(Vec3(local.x(), local.y(), 0.0)));
    const ConeDetection det =
        render_detection(Vec3(local.x(), local.y(), 0.0), ConeColor::Blue, ConeModel::small_cone(), cams[id], 0.5, rng);
    const ConeEstimate est = solve_cone_position(det, ConeModel::small_cone(), cams[id], kNoDepth);
    obs.push_back(to_observation(est, ConeColor::Blue, cams[id], id));
  }
  CHECK(deduplicate(obs).size() == 1);

  ConeObservation a;
  a.position = Vec2(10, 2);
  ConeObservation b;
  b.position = Vec2(10, -3);
  CHECK(deduplicate({a, b}).size() == 2);
  CHECK(deduplicate({}).empty());
}

TEST_CASE("deduplicate keeps the lower-covariance estimate and spaces outputs") {
  ConeObservation precise;
  precise.position = Vec2(8.0, 1.0);
  precise.cov = Mat2::Identity() * 0.01;
  precise.color = ConeColor::Unknown;
  ConeObservation coarse;
  coarse.position = Vec2(8.2, 1.03);
  coarse.cov = Mat2::Identity() * 0.5;
  coarse.color = ConeColor::Yellow;
  const auto out = deduplicate({coarse, precise});
  REQUIRE(out.size() == 1);
  CHECK(out[0].position == precise.position);
  CHECK(out[0].color == ConeColor::Yellow);

  RngStream rng(17, 0);
  std::vector<ConeObservation> many;
  for (int i = 0; i < 200; ++i) {
    ConeObservation o;
    o.position = Vec2(rng.uniform(2, 20), rng.uniform(-8, 8));
    o.cov = Mat2::Identity() * rng.uniform(0.01, 1.0);
    many.push_back(o);
  }
  const auto kept = deduplicate(many);
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK((kept[i].position - kept[j].position).norm() >= 0.3);
}
