#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fsd/control/mpc.hpp"
#include "fsd/control/ocp_qp.hpp"
#include "fsd/control/spline.hpp"
#include "fsd/control/vehicle_model.hpp"
#include "fsd/core/error.hpp"
#include "fsd/core/geometry.hpp"
#include "fsd/core/random.hpp"

using namespace fsd;
using namespace fsd::control;

namespace {

CenterlineSpline straight(double length) {
  std::vector<Vec2> pts;
  for (double x = 0.0; x <= length + 1e-9; x += 4.0) pts.emplace_back(x, 0.0);
  return CenterlineSpline::through(pts);
}

// Gently curving centerline with 4 m spacing.
CenterlineSpline wiggly(RngStream& rng, int n = 40) {
  std::vector<Vec2> pts{Vec2(0, 0)};
  double heading = 0.0;
  for (int i = 1; i < n; ++i) {
    heading += rng.uniform(-0.2, 0.2);
    pts.push_back(pts.back() + 4.0 * Vec2(std::cos(heading), std::sin(heading)));
  }
  return CenterlineSpline::through(pts);
}

MpcState state_near(const CenterlineSpline& sp, RngStream& rng) {
  const double p = rng.uniform(0.0, 20.0);
  const Vec2 c = sp.position(p);
  const double th = sp.heading(p);
  const double off = rng.uniform(-0.5, 0.5);
  MpcState x = MpcState::Zero();
  x[kSX] = c.x() - off * std::sin(th);
  x[kSY] = c.y() + off * std::cos(th);
  x[kSVx] = rng.uniform(0.0, 12.0);
  x[kSTheta] = th + rng.uniform(-0.2, 0.2);
  x[kSP] = p;
  x[kSDelta] = rng.uniform(-0.3, 0.3);
  x[kSD] = rng.uniform(-50.0, 50.0);
  return x;
}

}  // namespace

TEST_CASE("blend weight between the kinematic and dynamic models") {
  const VehicleParams p;
  CHECK(blend_alpha(3.0, p) == 0.0);
  CHECK(blend_alpha(6.0, p) == 1.0);
  CHECK(blend_alpha(4.5, p) == doctest::Approx(0.5));
  CHECK(blend_alpha(0.0, p) == 0.0);
  CHECK(blend_alpha(20.0, p) == 1.0);
}

TEST_CASE("blended derivative is continuous across the seams") {
  const VehicleParams p;
  RngStream rng(301, 0);
  for (double seam : {3.0, 6.0}) {
    for (int i = 0; i < 50; ++i) {
      MpcState x = MpcState::Zero();
      x[kSVy] = rng.uniform(-0.3, 0.3);
      x[kSTheta] = rng.uniform(-kPi, kPi);
      x[kSR] = rng.uniform(-0.5, 0.5);
      x[kSDelta] = rng.uniform(-0.3, 0.3);
      x[kSD] = rng.uniform(-80.0, 80.0);
      const MpcRates du(rng.uniform(-1, 1), rng.uniform(-100, 100), rng.uniform(0, 10));
      const double eps = 1e-7;
      MpcState lo = x;
      MpcState hi = x;
      lo[kSVx] = seam - eps;
      hi[kSVx] = seam + eps;
      const MpcState dlo = blended_derivative<double>(lo, du, p);
      const MpcState dhi = blended_derivative<double>(hi, du, p);
      CHECK((dhi - dlo).cwiseAbs().maxCoeff() < 1e-4);
    }
  }
}

TEST_CASE("linearize_step matches finite differences") {
  const VehicleParams p;
  RngStream rng(302, 0);
  for (int i = 0; i < 50; ++i) {
    MpcState x = MpcState::Zero();
    x[kSX] = rng.uniform(-10, 10);
    x[kSY] = rng.uniform(-10, 10);
    x[kSVx] = rng.uniform(7.0, 15.0);
    x[kSVy] = rng.uniform(-0.3, 0.3);
    x[kSTheta] = rng.uniform(-kPi, kPi);
    x[kSR] = rng.uniform(-0.5, 0.5);
    x[kSDelta] = rng.uniform(-0.3, 0.3);
    x[kSD] = rng.uniform(10.0, 80.0);
    const MpcRates du(rng.uniform(-1, 1), rng.uniform(-100, 100), rng.uniform(0, 10));
    Eigen::Matrix<double, kMpcNx, kMpcNx> a;
    Eigen::Matrix<double, kMpcNx, kMpcNdu> b;
    const MpcState next = linearize_step(x, du, 0.05, p, &a, &b);
    CHECK((next - rk4_step<double>(x, du, 0.05, p)).norm() < 1e-12);
    const double h = 1e-6;
    for (int j = 0; j < kMpcNx; ++j) {
      MpcState xp = x;
      MpcState xm = x;
      xp[j] += h;
      xm[j] -= h;
      const MpcState fd = (rk4_step<double>(xp, du, 0.05, p) - rk4_step<double>(xm, du, 0.05, p)) / (2 * h);
      CHECK((fd - a.col(j)).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
    for (int j = 0; j < kMpcNdu; ++j) {
      MpcRates up = du;
      MpcRates um = du;
      up[j] += h;
      um[j] -= h;
      const MpcState fd = (rk4_step<double>(x, up, 0.05, p) - rk4_step<double>(x, um, 0.05, p)) / (2 * h);
      CHECK((fd - b.col(j)).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("spline interpolates its knots and is C1 and C2") {
  RngStream rng(303, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const CenterlineSpline sp = wiggly(rng, 25);
    const auto& s = sp.params();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK((sp.position(s[i]) - sp.knots()[i]).norm() < 1e-9);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      const double e = 1e-7;
      CHECK((sp.derivative(s[i] - e) - sp.derivative(s[i] + e)).norm() < 1e-5);
      CHECK((sp.second_derivative(s[i] - e) - sp.second_derivative(s[i] + e)).norm() < 1e-4);
    }
    for (int k = 0; k < 50; ++k) {
      const double q = rng.uniform(0.01, sp.length() - 0.01);
      const double h = 1e-6;
      const Vec2 fd = (sp.position(q + h) - sp.position(q - h)) / (2 * h);
      CHECK((fd - sp.derivative(q)).norm() < 1e-6);
      // Arclength parametrization keeps the tangent near unit length.
      CHECK(sp.derivative(q).norm() == doctest::Approx(1.0).epsilon(0.02));
    }
  }
}

TEST_CASE("corridor terms") {
  const CenterlineSpline sp = straight(40.0);
  const CorridorTerms on = corridor_terms({10.0, 0.0}, 10.0, sp, 0.0);
  CHECK(on.d == doctest::Approx(0.0));
  CHECK(on.residual <= 0.0);

  const CorridorTerms edge = corridor_terms({10.0, 0.7}, 10.0, sp, 0.0);
  CHECK(edge.d == doctest::Approx(0.49));
  CHECK(edge.residual == doctest::Approx(0.0).epsilon(1e-12));

  const CorridorTerms out = corridor_terms({10.0, 1.0}, 10.0, sp, 0.0);
  CHECK(out.residual > 0.0);
  CHECK(minimal_slack(out.d, 0.7) == doctest::Approx(1.0 - 0.49));
  CHECK(corridor_terms({10.0, 1.0}, 10.0, sp, 0.51).residual == doctest::Approx(0.0).epsilon(1e-12));

  for (double p : {-0.1, sp.length() + 0.1}) {
    try {
      (void)corridor_terms({0.0, 0.0}, p, sp, 0.0);
      FAIL("expected ProgressOutOfDomain");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ProgressOutOfDomain);
    }
  }
}

TEST_CASE("progress projection") {
  RngStream rng(304, 0);
  const CenterlineSpline sp = wiggly(rng, 30);
  for (int i = 0; i < 100; ++i) {
    const double s = rng.uniform(5.0, sp.length() - 5.0);
    const Vec2 c = sp.position(s);
    CHECK(std::abs(project_progress(sp, c, s + rng.uniform(-3.0, 3.0)) - s) < 1e-3);
    const Vec2 t = sp.derivative(s).normalized();
    const Vec2 n(-t.y(), t.x());
    const double off = rng.uniform(-0.8, 0.8);
    CHECK(std::abs(project_progress(sp, c + off * n, s + rng.uniform(-3.0, 3.0)) - s) < 1e-3);
  }
}

TEST_CASE("objective gradient matches finite differences") {
  MpcConfig cfg;
  cfg.horizon = 10;
  MpcSolver solver(cfg);
  RngStream rng(305, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const CenterlineSpline sp = wiggly(rng);
    MpcState x0 = state_near(sp, rng);
    x0[kSVx] = rng.uniform(7.0, 12.0);
    x0[kSD] = rng.uniform(20.0, 60.0);
    x0[kSP] = std::max(x0[kSP], 5.0);
    std::vector<MpcInput> u(10);
    for (MpcInput& uk : u) {
      uk[kIPhi] = rng.uniform(-0.5, 0.5);
      uk[kIdD] = rng.uniform(0.0, 50.0);
      uk[kIdP] = rng.uniform(5.0, 12.0);
      uk[kIS] = rng.uniform(0.0, 0.3);
    }
    std::vector<MpcInput> g;
    (void)solver.objective_raw(x0, u, sp, &g);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      for (int j = 0; j < kQpNu; ++j) {
        const double h = 1e-6;
        std::vector<MpcInput> up = u;
        std::vector<MpcInput> um = u;
        up[k][j] += h;
        um[k][j] -= h;
        const double fd = (solver.objective_raw(x0, up, sp) - solver.objective_raw(x0, um, sp)) / (2 * h);
        num += (fd - g[k][j]) * (fd - g[k][j]);
        den += fd * fd;
      }
    }
    CHECK(std::sqrt(num / den) < 1e-5);
  }
}

TEST_CASE("linearized corridor row matches finite differences") {
  MpcConfig cfg;
  cfg.horizon = 3;
  MpcSolver solver(cfg);
  RngStream rng(306, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const CenterlineSpline sp = wiggly(rng);
    MpcState x0 = state_near(sp, rng);
    x0[kSVx] = rng.uniform(7.0, 12.0);
    x0[kSD] = rng.uniform(20.0, 60.0);
    std::vector<MpcInput> u(3, MpcInput(0.1, 10.0, 8.0, 0.0));
    const std::vector<MpcState> traj = solver.rollout(x0, u);
    const std::vector<QpStage> qp = solver.build_qp(x0, u, traj, sp);
    const auto dist = [&](const MpcInput& v) {
      const MpcState nx = rk4_step<double>(x0, v.head<kMpcNdu>(), cfg.dt, cfg.vehicle);
      return (Vec2(nx[kSX], nx[kSY]) - sp.position(nx[kSP])).squaredNorm();
    };
    const int row = kQpNc - 1;
    for (int j = 0; j < kMpcNdu; ++j) {
      const double h = 1e-6;
      MpcInput up = u[0];
      MpcInput um = u[0];
      up[j] += h;
      um[j] -= h;
      const double fd = (dist(up) - dist(um)) / (2 * h);
      CHECK(std::abs(fd - qp[0].G(row, kQpNx + j)) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
    CHECK(qp[0].G(row, kQpNx + kIS) == -1.0);
  }
}

TEST_CASE("OCP QP solver matches a dense solve without active constraints") {
  RngStream rng(307, 0);
  const int horizon = 3;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<QpStage> st(horizon);
    for (QpStage& s : st) {
      for (int i = 0; i < kQpNx; ++i) {
        for (int j = 0; j < kQpNx; ++j) s.A(i, j) = (i == j ? 1.0 : 0.0) + rng.uniform(-0.2, 0.2);
        for (int j = 0; j < kQpNu; ++j) s.B(i, j) = rng.uniform(-1, 1);
      }
      Eigen::Matrix<double, kQpNz, kQpNz> m;
      for (int i = 0; i < kQpNz; ++i)
        for (int j = 0; j < kQpNz; ++j) m(i, j) = rng.uniform(-1, 1);
      s.W = m * m.transpose() + Eigen::Matrix<double, kQpNz, kQpNz>::Identity();
      for (int i = 0; i < kQpNz; ++i) s.w[i] = rng.uniform(-1, 1);
    }
    // Condensed oracle: stacked z = M U because x_0 = 0.
    const int nu = horizon * kQpNu;
    const int nz = horizon * kQpNz;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nz, nu);
    Eigen::MatrixXd xmap = Eigen::MatrixXd::Zero(kQpNx, nu);
    for (int k = 0; k < horizon; ++k) {
      m.block(k * kQpNz, 0, kQpNx, nu) = xmap;
      m.block(k * kQpNz + kQpNx, k * kQpNu, kQpNu, kQpNu).setIdentity();
      Eigen::MatrixXd next = st[k].A * xmap;
      next.block(0, k * kQpNu, kQpNx, kQpNu) += st[k].B;
      xmap = next;
    }
    Eigen::MatrixXd wb = Eigen::MatrixXd::Zero(nz, nz);
    Eigen::VectorXd wv(nz);
    for (int k = 0; k < horizon; ++k) {
      wb.block(k * kQpNz, k * kQpNz, kQpNz, kQpNz) = st[k].W;
      wv.segment(k * kQpNz, kQpNz) = st[k].w;
    }
    const Eigen::VectorXd uopt = (m.transpose() * wb * m).ldlt().solve(-m.transpose() * wv);

    const QpSolution sol = solve_ocp_qp(st);
    REQUIRE(sol.converged);
    for (int k = 0; k < horizon; ++k) CHECK((sol.u[k] - uopt.segment(k * kQpNu, kQpNu)).norm() < 1e-6);
    CHECK(sol.x[0].norm() < 1e-9);
    for (int k = 0; k < horizon; ++k) CHECK((sol.x[k + 1] - st[k].A * sol.x[k] - st[k].B * sol.u[k]).norm() < 1e-8);
  }
}

TEST_CASE("OCP QP solver with active input boxes matches projected gradient") {
  RngStream rng(308, 0);
  const int horizon = 2;
  const double box = 0.1;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<QpStage> st(horizon);
    for (QpStage& s : st) {
      s.A.setIdentity();
      for (int i = 0; i < kQpNx; ++i)
        for (int j = 0; j < kQpNu; ++j) s.B(i, j) = rng.uniform(-0.5, 0.5);
      s.W.setIdentity();
      for (int i = 0; i < kQpNz; ++i) s.w[i] = rng.uniform(-2, 2);
      for (int i = 0; i < kQpNu; ++i) {
        s.G(i, kQpNx + i) = 1.0;
        s.h[i] = box;
        s.G(kQpNu + i, kQpNx + i) = -1.0;
        s.h[kQpNu + i] = box;
      }
    }
    const int nu = horizon * kQpNu;
    const int nz = horizon * kQpNz;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nz, nu);
    Eigen::MatrixXd xmap = Eigen::MatrixXd::Zero(kQpNx, nu);
    for (int k = 0; k < horizon; ++k) {
      m.block(k * kQpNz, 0, kQpNx, nu) = xmap;
      m.block(k * kQpNz + kQpNx, k * kQpNu, kQpNu, kQpNu).setIdentity();
      Eigen::MatrixXd next = st[k].A * xmap;
      next.block(0, k * kQpNu, kQpNx, kQpNu) += st[k].B;
      xmap = next;
    }
    Eigen::VectorXd wv(nz);
    for (int k = 0; k < horizon; ++k) wv.segment(k * kQpNz, kQpNz) = st[k].w;
    const Eigen::MatrixXd hess = m.transpose() * m;
    const Eigen::VectorXd lin = m.transpose() * wv;
    const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hess).eigenvalues().maxCoeff();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(nu);
    for (int it = 0; it < 20000; ++it) u = (u - step * (hess * u + lin)).cwiseMax(-box).cwiseMin(box);

    const QpSolution sol = solve_ocp_qp(st);
    REQUIRE(sol.converged);
    for (int k = 0; k < horizon; ++k) {
      CHECK((sol.u[k] - u.segment(k * kQpNu, kQpNu)).norm() < 1e-6);
      CHECK(sol.u[k].cwiseAbs().maxCoeff() <= box + 1e-8);
    }
  }
}

TEST_CASE("straight line from rest accelerates without steering") {
  const CenterlineSpline sp = straight(120.0);
  MpcSolver solver(MpcConfig{});
  const MpcResult res = solver.solve(MpcState::Zero(), sp);
  CHECK(std::abs(res.delta_cmd) < 1e-6);
  CHECK(res.D_cmd > 0.0);
  CHECK(res.trajectory.size() == 41);
  CHECK(res.inputs.size() == 40);
}

TEST_CASE("braking zone penalty decreases throttle in the first step") {
  const CenterlineSpline sp = straight(120.0);
  MpcConfig cfg;
  cfg.brake_start = 0.0;
  MpcSolver solver(cfg);
  MpcState x0 = MpcState::Zero();
  x0[kSVx] = 10.0;
  x0[kSD] = 30.0;
  const MpcResult res = solver.solve(x0, sp);
  CHECK(res.inputs[0][kIdD] < 0.0);
  CHECK(res.D_cmd < 30.0);
}

TEST_CASE("single-step problem matches a dense grid search") {
  const CenterlineSpline sp = straight(60.0);
  MpcConfig cfg;
  cfg.horizon = 1;
  RngStream rng(309, 0);
  for (int trial = 0; trial < 5; ++trial) {
    MpcSolver solver(cfg);
    MpcState x0 = MpcState::Zero();
    x0[kSX] = rng.uniform(0.0, 5.0);
    x0[kSY] = rng.uniform(-0.9, 0.9);
    x0[kSVx] = rng.uniform(2.0, 10.0);
    x0[kSTheta] = rng.uniform(-0.2, 0.2);
    x0[kSP] = x0[kSX];
    x0[kSDelta] = rng.uniform(-0.2, 0.2);
    x0[kSD] = rng.uniform(-30.0, 30.0);
    const MpcResult res = solver.solve(x0, sp);
    const double j_solver = solver.objective(x0, res.inputs, sp);

    const double s_phi = 0.05;
    const double s_dd = 10.0;
    const double s_dp = 0.5;
    double best = std::numeric_limits<double>::infinity();
    MpcInput arg = MpcInput::Zero();
    for (int a = -40; a <= 40; ++a) {
      for (int b = -40; b <= 40; ++b) {
        for (int c = 0; c <= 40; ++c) {
          const std::vector<MpcInput> u{MpcInput(a * s_phi, b * s_dd, c * s_dp, 0.0)};
          const double j = solver.objective(x0, u, sp);
          if (j < best) {
            best = j;
            arg = u[0];
          }
        }
      }
    }
    CHECK(j_solver <= best + 1e-9);
    CHECK(std::abs(res.inputs[0][kIPhi] - arg[kIPhi]) <= s_phi);
    CHECK(std::abs(res.inputs[0][kIdD] - arg[kIdD]) <= s_dd);
    CHECK(std::abs(res.inputs[0][kIdP] - arg[kIdP]) <= s_dp);
  }
}

TEST_CASE("SQP invariants on random instances") {
  RngStream rng(310, 0);
  const MpcConfig cfg;
  int converged = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const CenterlineSpline sp = wiggly(rng);
    const MpcState x0 = state_near(sp, rng);
    MpcSolver solver(cfg);
    const MpcResult res = solver.solve(x0, sp);
    converged += res.converged ? 1 : 0;

    const auto& h = res.objective_history;
    REQUIRE(!h.empty());
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-12 * std::abs(h[i - 1]));

    // Independent re-integration of the returned inputs.
    MpcState x = x0;
    double err = 0.0;
    for (std::size_t k = 0; k < res.inputs.size(); ++k) {
      x = rk4_step<double>(x, res.inputs[k].head<kMpcNdu>(), cfg.dt, cfg.vehicle);
      err = std::max(err, (x - res.trajectory[k + 1]).cwiseAbs().maxCoeff());
    }
    CHECK(err < 1e-6);

    for (std::size_t k = 0; k < res.inputs.size(); ++k) {
      const MpcInput& u = res.inputs[k];
      const MpcState& xk = res.trajectory[k + 1];
      CHECK(std::abs(u[kIPhi]) <= cfg.phi_max());
      CHECK(std::abs(u[kIdD]) <= cfg.dD_max);
      CHECK(u[kIdP] >= 0.0);
      CHECK(u[kIS] >= 0.0);
      CHECK(std::abs(xk[kSDelta]) <= cfg.delta_max);
      CHECK(std::abs(xk[kSD]) <= 100.0);
      CHECK(xk[kSP] >= res.trajectory[k][kSP]);
    }
    CHECK(res.delta_cmd == res.trajectory[1][kSDelta]);
    CHECK(res.D_cmd == res.trajectory[1][kSD]);
  }
  MESSAGE("converged " << converged << "/100");
}

TEST_CASE("warm start shifts the previous solution") {
  const CenterlineSpline sp = straight(200.0);
  MpcSolver solver(MpcConfig{});
  MpcState x0 = MpcState::Zero();
  x0[kSVx] = 5.0;
  const MpcResult first = solver.solve(x0, sp);
  const MpcResult second = solver.solve(first.trajectory[1], sp);
  MpcSolver cold(MpcConfig{});
  const MpcResult fresh = cold.solve(first.trajectory[1], sp);
  // Starting from the shifted plan needs no more iterations than a cold start.
  CHECK(second.iterations <= fresh.iterations);
  CHECK(std::abs(second.D_cmd - fresh.D_cmd) < 1.0);
}

TEST_CASE("solver rejects bad input") {
  const CenterlineSpline sp = straight(40.0);
  MpcSolver solver(MpcConfig{});
  MpcState x0 = MpcState::Zero();
  x0[kSVx] = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)solver.solve(x0, sp);
    FAIL("expected NonFiniteState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteState);
  }
  MpcConfig bad;
  bad.weights.q_s = 0.0;
  CHECK_THROWS_AS(MpcSolver{bad}, std::invalid_argument);
}
