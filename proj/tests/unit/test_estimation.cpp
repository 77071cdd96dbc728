#include <doctest.h>

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "fsd/core/error.hpp"
#include "fsd/core/random.hpp"
#include "fsd/estimation/ekf.hpp"

using namespace fsd;
using namespace fsd::est;

namespace {

StateVec random_state(RngStream& rng) {
  StateVec x;
  x << rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-kPi, kPi), rng.uniform(-5, 25),
      rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-10, 10), rng.uniform(-10, 10);
  return x;
}

template <typename F>
StateMat fd_jacobian(F f, const StateVec& x) {
  StateMat j;
  for (int i = 0; i < kStateDim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    StateVec a = x;
    StateVec b = x;
    a[i] += h;
    b[i] -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

void check_cov(const StateMat& p) {
  CHECK(asymmetry(p) < 1e-9);
  CHECK(min_eigenvalue(p) > -1e-9);
}

GnssPose gnss_pose(const StateVec& x, double sigma, double t) {
  GnssPose g;
  g.z = Eigen::Vector3d(x[kX], x[kY], x[kPsi]);
  g.cov = Eigen::Vector3d(sigma * sigma, sigma * sigma, 1e-4).asDiagonal();
  g.t = t;
  return g;
}

// Draws a sample of N(0, cov).
template <int N>
Eigen::Matrix<double, N, 1> sample(RngStream& rng, const Eigen::Matrix<double, N, N>& cov) {
  Eigen::Matrix<double, N, 1> n;
  for (int i = 0; i < N; ++i) n[i] = rng.normal();
  return Eigen::LLT<Eigen::Matrix<double, N, N>>(cov).matrixL() * n;
}

}  // namespace

TEST_CASE("predict: stationary fixed point") {
  EkfState s;
  s.mean << 3.0, -2.0, 0.7, 0, 0, 0, 0, 0;
  for (double dt : {0.001, 0.05, 0.1}) {
    const EkfState p = predict(s, dt, ProcessModelKind::RigidBody, EkfConfig{}.process_noise);
    CHECK((p.mean - s.mean).norm() < 1e-15);
    check_cov(p.cov);
  }
}

TEST_CASE("predict: straight line") {
  EkfState s;
  s.mean << 0, 0, 0, 10, 0, 0, 0, 0;
  const EkfState p = predict(s, 0.1, ProcessModelKind::RigidBody, EkfConfig{}.process_noise);
  StateVec expected = s.mean;
  expected[kX] = 1.0;
  CHECK((p.mean - expected).norm() < 1e-12);
  CHECK(p.t == doctest::Approx(0.1));
}

TEST_CASE("rigid-body velocity derivative") {
  StateVec x = StateVec::Zero();
  x[kVx] = 10.0;
  x[kR] = 0.5;
  const StateVec d = rigid_body_derivative(x);
  CHECK(d[kVx] == doctest::Approx(0.0));
  CHECK(d[kVy] == doctest::Approx(-5.0));
}

TEST_CASE("predict rejects bad dt and non-finite states") {
  EkfState s;
  CHECK_THROWS_AS((void)predict(s, 0.0, ProcessModelKind::RigidBody, EkfConfig{}.process_noise), std::invalid_argument);
  CHECK_THROWS_AS((void)predict(s, 0.2, ProcessModelKind::RigidBody, EkfConfig{}.process_noise), std::invalid_argument);
  s.mean[kVx] = std::numeric_limits<double>::infinity();
  try {
    (void)predict(s, 0.05, ProcessModelKind::RigidBody, EkfConfig{}.process_noise);
    FAIL("expected NonFiniteState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteState);
  }
}

TEST_CASE("analytic Jacobians match central differences") {
  RngStream rng(101, 0);
  const BicycleParams bp;
  for (int i = 0; i < 100; ++i) {
    const StateVec x = random_state(rng);
    const double steer = rng.uniform(-0.4, 0.4);

    CHECK(rel_error(rigid_body_jacobian(x), fd_jacobian(rigid_body_derivative, x)) < 1e-5);
    CHECK(rel_error(kinematic_jacobian(x, steer, bp),
                    fd_jacobian([&](const StateVec& s) { return kinematic_derivative(s, steer, bp); }, x)) < 1e-5);

    for (ProcessModelKind kind : {ProcessModelKind::RigidBody, ProcessModelKind::KinematicBicycle}) {
      StateMat f;
      (void)propagate_mean(x, 0.05, kind, steer, bp, &f);
      const StateMat fd =
          fd_jacobian([&](const StateVec& s) { return propagate_mean(s, 0.05, kind, steer, bp); }, x);
      CHECK(rel_error(f, fd) < 1e-5);
    }

    // Measurement Jacobians, GSS is the only nonlinear-looking one.
    const Vec2 lever(rng.uniform(-2, 2), rng.uniform(-1, 1));
    GssVel g{Vec2::Zero(), Mat2::Identity(), 0.0};
    const MeasurementModel mm = measurement_model(x, g, lever);
    Eigen::MatrixXd fd(2, kStateDim);
    for (int k = 0; k < kStateDim; ++k) {
      StateVec a = x;
      StateVec b = x;
      a[k] += 1e-6;
      b[k] -= 1e-6;
      fd.col(k) = (predicted_gss_velocity(a, lever) - predicted_gss_velocity(b, lever)) / 2e-6;
    }
    CHECK(rel_error(mm.H, fd) < 1e-5);
  }
}

TEST_CASE("GSS lever arm prediction") {
  StateVec x = StateVec::Zero();
  x[kVx] = 10.0;
  x[kR] = 1.0;
  const Vec2 v = predicted_gss_velocity(x, Vec2(-1.5, 0.0));
  CHECK(v.x() == doctest::Approx(10.0));
  CHECK(v.y() == doctest::Approx(-1.5));
}

TEST_CASE("zero-innovation GNSS update shrinks covariance") {
  EkfState s;
  s.mean << 5, 6, 0.3, 4, 0.1, 0.05, 0.2, 0.1;
  const UpdateResult u = update(s, gnss_pose(s.mean, 0.5, 0.0), Vec2(-0.8, 0));
  CHECK(u.outcome == UpdateOutcome::Applied);
  CHECK((u.state.mean - s.mean).norm() < 1e-15);
  CHECK(u.state.cov.trace() < s.cov.trace());
  check_cov(u.state.cov);
}

TEST_CASE("update gates outliers and leaves the state unchanged") {
  EkfState s;
  s.cov = StateMat::Identity() * 0.01;
  StateVec far = s.mean;
  far[kX] = 50.0;
  const UpdateResult u = update(s, gnss_pose(far, 0.1, 0.0), Vec2(-0.8, 0));
  CHECK(u.outcome == UpdateOutcome::Rejected);
  CHECK(u.state.mean == s.mean);
  CHECK(u.state.cov == s.cov);
  CHECK(u.mahalanobis > 1000.0);
}

TEST_CASE("update errors") {
  EkfState s;
  s.t = 1.0;
  CHECK_THROWS_AS((void)update(s, gnss_pose(s.mean, 0.1, 0.5), Vec2::Zero()), std::invalid_argument);

  s.cov.setZero();
  ImuYawRate r{0.0, 0.0, 1.0};
  try {
    (void)update(s, r, Vec2::Zero());
    FAIL("expected SingularInnovation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularInnovation);
  }
}

TEST_CASE("heading residual wraps across pi") {
  EkfState s;
  s.mean[kPsi] = kPi - 0.01;
  StateVec z = s.mean;
  z[kPsi] = -kPi + 0.01;
  const UpdateResult u = update(s, gnss_pose(z, 0.5, 0.0), Vec2::Zero());
  CHECK(u.outcome == UpdateOutcome::Applied);
  CHECK(std::abs(angle_diff(u.state.mean[kPsi], kPi)) < 0.01);
}

TEST_CASE("1D constant-acceleration subcase equals the closed-form Kalman filter") {
  // With psi = v_y = r = 0 the (X, v_x, a_x) block is linear and decoupled.
  EkfState s;
  s.mean << 0, 0, 0, 3.0, 0, 0, 0.5, 0;
  s.cov = StateMat::Identity();
  StateVec q = StateVec::Constant(1e-3);
  q[kPsi] = q[kVy] = q[kR] = 0.0;  // keep the decoupling exact
  q[kAy] = 0.0;

  Eigen::Vector3d m(0, 3.0, 0.5);
  Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
  const double dt = 0.05;
  Eigen::Matrix3d f;
  f << 1, dt, 0.5 * dt * dt, 0, 1, dt, 0, 0, 1;
  const Eigen::Matrix3d qd = Eigen::Vector3d(q[kX], q[kVx], q[kAx]).asDiagonal() * dt;
  const Eigen::RowVector3d h(1, 0, 0);
  const double r = 0.04;

  RngStream rng(7, 0);
  for (int k = 1; k <= 40; ++k) {
    s = predict(s, dt, ProcessModelKind::RigidBody, q);
    m = f * m;
    p = f * p * f.transpose() + qd;

    const double zx = 3.0 * k * dt + rng.normal(0.0, 0.2);
    GnssPose g;
    g.z = Eigen::Vector3d(zx, 0.0, 0.0);
    g.cov = Eigen::Vector3d(r, r, 1e-3).asDiagonal();
    g.t = s.t;
    s = update(s, g, Vec2::Zero(), 1.0 - 1e-12).state;

    const double sk = h * p * h.transpose() + r;
    const Eigen::Vector3d kk = p * h.transpose() / sk;
    m += kk * (zx - h * m);
    const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - kk * h;
    p = ikh * p * ikh.transpose() + kk * r * kk.transpose();

    const Eigen::Vector3d em(s.mean[kX], s.mean[kVx], s.mean[kAx]);
    Eigen::Matrix3d ep;
    const int idx[3] = {kX, kVx, kAx};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ep(i, j) = s.cov(idx[i], idx[j]);
    CHECK((em - m).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ep - p).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("covariance stays symmetric PSD through random predict/update sequences") {
  RngStream rng(33, 0);
  EkfConfig cfg;
  for (int run = 0; run < 20; ++run) {
    EkfState s;
    s.mean = random_state(rng);
    for (int k = 0; k < 60; ++k) {
      const auto kind = k % 2 == 0 ? ProcessModelKind::RigidBody : ProcessModelKind::KinematicBicycle;
      s = predict(s, rng.uniform(0.005, 0.1), kind, cfg.process_noise, rng.uniform(-0.3, 0.3));
      check_cov(s.cov);
      const StateVec& x = s.mean;
      std::vector<Measurement> ms{
          gnss_pose(x + StateVec::Constant(rng.normal(0.0, 0.3)), 0.3, s.t),
          GnssVel{Vec2(x[kVx], x[kVy]), Mat2::Identity() * 0.04, s.t},
          ImuAccel{Vec2(x[kAx], x[kAy]), Mat2::Identity() * 0.25, s.t},
          ImuYawRate{x[kR], 1e-3, s.t},
          GssVel{predicted_gss_velocity(x, cfg.gss_lever_arm), Mat2::Identity() * 0.01, s.t},
      };
      for (const auto& m : ms) {
        s = update(s, m, cfg.gss_lever_arm).state;
        check_cov(s.cov);
      }
    }
  }
}

TEST_CASE("step: sensor ladder") {
  EkfConfig cfg;
  EkfState s;
  s.mean << 0, 0, 0, 5, 0, 0, 0, 0;
  s.cov = StateMat::Identity() * 0.1;
  auto measurements = [&](const EkfState& st) {
    const double t = st.t + 0.05;
    const StateVec& x = st.mean;
    return std::vector<Measurement>{
        gnss_pose(x, 0.3, t),
        GnssVel{Vec2(x[kVx], x[kVy]), Mat2::Identity() * 0.04, t},
        ImuAccel{Vec2(0, 0), Mat2::Identity() * 0.25, t},
        ImuYawRate{0.0, 1e-3, t},
        GssVel{Vec2(x[kVx], x[kVy]), Mat2::Identity() * 0.01, t},
    };
  };

  SUBCASE("all ok") {
    const StepResult r = step(s, {}, measurements(s), 0.05, cfg);
    CHECK(r.model == ProcessModelKind::RigidBody);
    CHECK(r.applied == 5);
  }
  SUBCASE("gss failed keeps every GNSS and IMU update") {
    const StepResult r = step(s, {true, false, true, 0.0}, measurements(s), 0.05, cfg);
    CHECK(r.model == ProcessModelKind::RigidBody);
    CHECK(r.applied == 4);
  }
  SUBCASE("gnss failed: position covariance grows monotonically") {
    EkfState st = s;
    double last = st.cov(kX, kX) + st.cov(kY, kY);
    for (int k = 0; k < 100; ++k) {
      const StepResult r = step(st, {false, true, true, 0.0}, measurements(st), 0.05, cfg);
      CHECK(r.applied == 3);
      const double pos = r.state.cov(kX, kX) + r.state.cov(kY, kY);
      CHECK(pos > last);
      last = pos;
      st = r.state;
    }
  }
  SUBCASE("gnss and gss failed switch to the kinematic model") {
    const StepResult r = step(s, {false, false, true, 0.0}, measurements(s), 0.05, cfg, 0.1);
    CHECK(r.model == ProcessModelKind::KinematicBicycle);
    CHECK(r.applied == 2);
  }
  SUBCASE("everything failed is terminal") {
    try {
      (void)step(s, {false, false, false, 0.0}, measurements(s), 0.05, cfg);
      FAIL("expected TerminalSensorFault");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TerminalSensorFault);
    }
  }
}

TEST_CASE("step is deterministic") {
  EkfConfig cfg;
  EkfState s;
  s.mean << 1, 2, 0.3, 5, 0.2, 0.1, 0.5, -0.3;
  std::vector<Measurement> ms{gnss_pose(s.mean, 0.3, 0.05), ImuYawRate{0.12, 1e-3, 0.05}};
  const StepResult a = step(s, {}, ms, 0.05, cfg, 0.05);
  const StepResult b = step(s, {}, ms, 0.05, cfg, 0.05);
  CHECK(a.state.mean == b.state.mean);
  CHECK(a.state.cov == b.state.cov);
}

TEST_CASE("NEES stays within the 95% consistency band") {
  // Truth driven by the filter's own process noise around a stationary start;
  // all measurements from GNSS, GSS and IMU.
  constexpr int kRuns = 50;
  constexpr int kSteps = 100;
  constexpr double dt = 0.05;
  EkfConfig cfg;
  const StateMat q = StateMat(cfg.process_noise.asDiagonal()) * dt;
  const StateMat p0 = StateMat::Identity() * 0.01;

  std::vector<double> anees(kSteps, 0.0);
  for (int run = 0; run < kRuns; ++run) {
    RngStream rng(2024, static_cast<std::uint64_t>(run));
    StateVec truth = StateVec::Zero();
    EkfState s;
    s.cov = p0;
    s.mean = truth + sample<kStateDim>(rng, p0);

    for (int k = 0; k < kSteps; ++k) {
      truth = propagate_mean(truth, dt, ProcessModelKind::RigidBody, 0.0, cfg.bicycle) + sample<kStateDim>(rng, q);
      const double t = (k + 1) * dt;
      const Eigen::Matrix3d rp = Eigen::Vector3d(0.01, 0.01, 1e-4).asDiagonal();
      const Mat2 rv = Mat2::Identity() * 0.01;
      const Mat2 ra = Mat2::Identity() * 0.05;
      const Eigen::Matrix<double, 1, 1> rr = Eigen::Matrix<double, 1, 1>::Constant(1e-4);
      std::vector<Measurement> ms{
          GnssPose{Eigen::Vector3d(truth[kX], truth[kY], truth[kPsi]) + sample<3>(rng, rp), rp, t},
          GnssVel{Vec2(truth[kVx], truth[kVy]) + sample<2>(rng, rv), rv, t},
          ImuAccel{Vec2(truth[kAx], truth[kAy]) + sample<2>(rng, ra), ra, t},
          ImuYawRate{truth[kR] + sample<1>(rng, rr)[0], rr(0, 0), t},
          GssVel{predicted_gss_velocity(truth, cfg.gss_lever_arm) + sample<2>(rng, rv), rv, t},
      };
      s = step(s, {}, ms, dt, cfg).state;
      StateVec e = s.mean - truth;
      e[kPsi] = angle_diff(s.mean[kPsi], truth[kPsi]);
      anees[k] += e.dot(s.cov.ldlt().solve(e)) / kRuns;
    }
  }

  boost::math::chi_squared dist(kRuns * kStateDim);
  const double lo = boost::math::quantile(dist, 0.025) / kRuns;
  const double hi = boost::math::quantile(dist, 0.975) / kRuns;
  int inside = 0;
  double mean = 0.0;
  for (double a : anees) {
    inside += (a >= lo && a <= hi) ? 1 : 0;
    mean += a / kSteps;
  }
  MESSAGE("ANEES band [" << lo << ", " << hi << "], inside " << inside << "/" << kSteps << ", mean " << mean);
  CHECK(inside >= 95);
  CHECK(mean > lo);
  CHECK(mean < hi);
}

TEST_CASE("GNSS outage: velocity error stays bounded over 30 s") {
  EkfConfig cfg;
  constexpr double dt = 0.01;
  RngStream rng(55, 0);
  StateVec truth = StateVec::Zero();
  truth[kVx] = 8.0;
  EkfState s;
  s.mean = truth;
  s.cov = StateMat::Identity() * 0.01;

  double sq_early = 0.0;
  int n_early = 0;
  double sq_late = 0.0;
  int n_late = 0;
  for (int k = 0; k < 3000; ++k) {
    const double t = (k + 1) * dt;
    // Slalom-like manoeuvre: sinusoidal yaw rate and longitudinal acceleration.
    truth[kR] = 0.6 * std::sin(0.8 * t);
    truth[kAx] = 1.5 * std::sin(0.3 * t);
    truth[kAy] = 0.2 * std::cos(0.8 * t);
    truth = propagate_mean(truth, dt, ProcessModelKind::RigidBody, 0.0, cfg.bicycle);
    const Mat2 rv = Mat2::Identity() * 0.01;
    const Mat2 ra = Mat2::Identity() * 0.05;
    std::vector<Measurement> ms{
        ImuAccel{Vec2(truth[kAx], truth[kAy]) + sample<2>(rng, ra), ra, t},
        ImuYawRate{truth[kR] + rng.normal(0.0, 0.01), 1e-4, t},
        GssVel{predicted_gss_velocity(truth, cfg.gss_lever_arm) + sample<2>(rng, rv), rv, t},
    };
    s = step(s, {false, true, true, t}, ms, dt, cfg).state;
    const double e2 = std::pow(s.mean[kVx] - truth[kVx], 2) + std::pow(s.mean[kVy] - truth[kVy], 2) +
                      std::pow(s.mean[kR] - truth[kR], 2);
    if (t > 2.0 && t <= 10.0) {
      sq_early += e2;
      ++n_early;
    } else if (t > 22.0) {
      sq_late += e2;
      ++n_late;
    }
  }
  const double early = std::sqrt(sq_early / n_early);
  const double late = std::sqrt(sq_late / n_late);
  MESSAGE("velocity RMS 2-10 s " << early << ", 22-30 s " << late);
  CHECK(late < 1.5 * early + 1e-3);
  CHECK(late < 0.2);
}
