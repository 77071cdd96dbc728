#include "fsd/control/mpc.hpp"

#include <algorithm>

#include "fsd/core/error.hpp"

namespace fsd::control {

namespace {

using MatXX = Eigen::Matrix<double, kQpNx, kQpNx>;
using MatXU = Eigen::Matrix<double, kQpNx, kQpNu>;
using MatXZ = Eigen::Matrix<double, kQpNx, kQpNz>;

MpcRates rates_of(const MpcInput& u) { return u.head<kMpcNdu>(); }

}  // namespace

MpcSolver::MpcSolver(MpcConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.horizon < 1) throw std::invalid_argument("MPC horizon must be positive");
  if (!(cfg_.weights.q_s > 0.0)) throw std::invalid_argument("slack weight must be positive");
}

std::vector<MpcState> MpcSolver::rollout(const MpcState& x0, const std::vector<MpcInput>& u) const {
  std::vector<MpcState> traj;
  traj.reserve(u.size() + 1);
  traj.push_back(x0);
  for (const MpcInput& uk : u) traj.push_back(rk4_step<double>(traj.back(), rates_of(uk), cfg_.dt, cfg_.vehicle));
  return traj;
}

double MpcSolver::stage_input_cost(const MpcInput& u) const {
  const MpcWeights& w = cfg_.weights;
  return w.q_D * u[kIdD] * u[kIdD] + w.q_phi * u[kIPhi] * u[kIPhi] - w.q_p * u[kIdP] + w.q_s * u[kIS] * u[kIS];
}

double MpcSolver::stage_state_cost(const MpcState& x, const CenterlineSpline& spline, QpVecX* g, MatXX* h) const {
  const MpcWeights& w = cfg_.weights;
  const double p = std::clamp(x[kSP], 0.0, spline.length());
  const Vec2 e = Vec2(x[kSX], x[kSY]) - spline.position(p);
  const Vec2 dc = spline.derivative(p);
  double j = -w.q_vx * x[kSVx] + w.q_d * e.squaredNorm();
  if (g != nullptr) {
    g->setZero();
    h->setZero();
    (*g)[kSVx] = -w.q_vx;
    // e = (X - Xc(p), Y - Yc(p)); Jacobian rows over (X, Y, p).
    Eigen::Matrix<double, 2, 3> je;
    je << 1.0, 0.0, -dc.x(), 0.0, 1.0, -dc.y();
    const Eigen::Vector3d ge = 2.0 * w.q_d * je.transpose() * e;
    const Eigen::Matrix3d he = 2.0 * w.q_d * je.transpose() * je;
    const int idx[3] = {kSX, kSY, kSP};
    for (int a = 0; a < 3; ++a) {
      (*g)[idx[a]] += ge[a];
      for (int b = 0; b < 3; ++b) (*h)(idx[a], idx[b]) += he(a, b);
    }
  }
  const double over = x[kSVx] - cfg_.v_cap;
  if (over > 0.0) {
    j += w.q_cap * over * over;
    if (g != nullptr) {
      (*g)[kSVx] += 2.0 * w.q_cap * over;
      (*h)(kSVx, kSVx) += 2.0 * w.q_cap;
    }
  }
  if (x[kSP] >= cfg_.brake_start) {
    j += w.c_speed * x[kSVx] * x[kSVx];
    if (g != nullptr) {
      (*g)[kSVx] += 2.0 * w.c_speed * x[kSVx];
      (*h)(kSVx, kSVx) += 2.0 * w.c_speed;
    }
  }
  return j;
}

double MpcSolver::objective_raw(const MpcState& x0, const std::vector<MpcInput>& u, const CenterlineSpline& spline,
                                std::vector<MpcInput>* grad) const {
  const std::size_t n = u.size();
  std::vector<MpcState> traj(n + 1);
  std::vector<MatXX> a(grad != nullptr ? n : 0);
  std::vector<Eigen::Matrix<double, kMpcNx, kMpcNdu>> b(grad != nullptr ? n : 0);
  traj[0] = x0;
  for (std::size_t k = 0; k < n; ++k) {
    traj[k + 1] = grad != nullptr ? linearize_step(traj[k], rates_of(u[k]), cfg_.dt, cfg_.vehicle, &a[k], &b[k])
                                  : rk4_step<double>(traj[k], rates_of(u[k]), cfg_.dt, cfg_.vehicle);
  }
  double j = 0.0;
  std::vector<QpVecX> gx(n + 1, QpVecX::Zero());
  MatXX hx;
  for (std::size_t k = 0; k < n; ++k) {
    j += stage_input_cost(u[k]);
    j += stage_state_cost(traj[k + 1], spline, grad != nullptr ? &gx[k + 1] : nullptr, &hx);
  }
  if (grad != nullptr) {
    const MpcWeights& w = cfg_.weights;
    grad->assign(n, MpcInput::Zero());
    QpVecX costate = gx[n];
    for (std::size_t k = n; k-- > 0;) {
      MpcInput& gk = (*grad)[k];
      gk[kIPhi] = 2.0 * w.q_phi * u[k][kIPhi];
      gk[kIdD] = 2.0 * w.q_D * u[k][kIdD];
      gk[kIdP] = -w.q_p;
      gk[kIS] = 2.0 * w.q_s * u[k][kIS];
      gk.head<kMpcNdu>() += b[k].transpose() * costate;
      costate = gx[k] + a[k].transpose() * costate;
    }
  }
  return j;
}

double MpcSolver::objective(const MpcState& x0, const std::vector<MpcInput>& u, const CenterlineSpline& spline) const {
  std::vector<MpcInput> v = u;
  const std::vector<MpcState> traj = rollout(x0, v);
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double p = std::clamp(traj[k + 1][kSP], 0.0, spline.length());
    const double d = (Vec2(traj[k + 1][kSX], traj[k + 1][kSY]) - spline.position(p)).squaredNorm();
    v[k][kIS] = minimal_slack(d, cfg_.corridor);
  }
  return objective_raw(x0, v, spline);
}

void MpcSolver::project_feasible(const MpcState& x0, std::vector<MpcInput>& u, const CenterlineSpline& spline) const {
  const double margin = 1e-12;
  const double dt = cfg_.dt;
  const double phi_max = cfg_.phi_max();
  MpcState x = x0;
  for (MpcInput& uk : u) {
    const double lo_phi = std::max(-phi_max, (-cfg_.delta_max - x[kSDelta]) / dt + margin);
    const double hi_phi = std::min(phi_max, (cfg_.delta_max - x[kSDelta]) / dt - margin);
    uk[kIPhi] = std::clamp(uk[kIPhi], std::min(lo_phi, hi_phi), hi_phi);
    const double lo_dd = std::max(-cfg_.dD_max, (-100.0 - x[kSD]) / dt + margin);
    const double hi_dd = std::min(cfg_.dD_max, (100.0 - x[kSD]) / dt - margin);
    uk[kIdD] = std::clamp(uk[kIdD], std::min(lo_dd, hi_dd), hi_dd);
    const double hi_dp = std::max(0.0, std::min(cfg_.dp_max, (spline.length() - x[kSP]) / dt - margin));
    uk[kIdP] = std::clamp(uk[kIdP], 0.0, hi_dp);
    uk[kIS] = std::max(0.0, uk[kIS]);
    x = rk4_step<double>(x, rates_of(uk), dt, cfg_.vehicle);
  }
}

std::vector<QpStage> MpcSolver::build_qp(const MpcState& x0, const std::vector<MpcInput>& u,
                                         const std::vector<MpcState>& traj, const CenterlineSpline& spline) const {
  (void)x0;
  const std::size_t n = u.size();
  const MpcWeights& w = cfg_.weights;
  const double w2 = cfg_.corridor * cfg_.corridor;
  const double phi_max = cfg_.phi_max();
  std::vector<QpStage> st(n);
  for (std::size_t k = 0; k < n; ++k) {
    QpStage& s = st[k];
    Eigen::Matrix<double, kMpcNx, kMpcNdu> b;
    const MpcState next = linearize_step(traj[k], rates_of(u[k]), cfg_.dt, cfg_.vehicle, &s.A, &b);
    s.B.setZero();
    s.B.leftCols<kMpcNdu>() = b;
    MatXZ t;
    t << s.A, s.B;

    // Cost: inputs of stage k and state cost at x_{k+1} through the linearized dynamics.
    QpVecX gx;
    MatXX hx;
    stage_state_cost(next, spline, &gx, &hx);
    s.W = t.transpose() * hx * t;
    s.w = t.transpose() * gx;
    const int o = kQpNx;
    s.W(o + kIPhi, o + kIPhi) += 2.0 * w.q_phi;
    s.w[o + kIPhi] += 2.0 * w.q_phi * u[k][kIPhi];
    s.W(o + kIdD, o + kIdD) += 2.0 * w.q_D;
    s.w[o + kIdD] += 2.0 * w.q_D * u[k][kIdD];
    s.w[o + kIdP] += -w.q_p;
    s.W(o + kIS, o + kIS) += 2.0 * w.q_s;
    s.w[o + kIS] += 2.0 * w.q_s * u[k][kIS];

    // Constraints G dz <= h.
    s.G.setZero();
    int r = 0;
    const auto state_row = [&](int idx, double sign, double bound) {
      s.G.row(r) = sign * t.row(idx);
      s.h[r] = bound - sign * next[idx];
      ++r;
    };
    state_row(kSDelta, 1.0, cfg_.delta_max);
    state_row(kSDelta, -1.0, cfg_.delta_max);
    state_row(kSD, 1.0, 100.0);
    state_row(kSD, -1.0, 100.0);
    state_row(kSP, 1.0, spline.length());
    const auto input_row = [&](int idx, double sign, double bound) {
      s.G(r, o + idx) = sign;
      s.h[r] = bound - sign * u[k][idx];
      ++r;
    };
    input_row(kIPhi, 1.0, phi_max);
    input_row(kIPhi, -1.0, phi_max);
    input_row(kIdD, 1.0, cfg_.dD_max);
    input_row(kIdD, -1.0, cfg_.dD_max);
    input_row(kIdP, 1.0, cfg_.dp_max);
    input_row(kIdP, -1.0, 0.0);
    input_row(kIS, -1.0, 0.0);
    // Linearized corridor: d(x_{k+1}) - S <= w^2.
    const double p = std::clamp(next[kSP], 0.0, spline.length());
    const Vec2 e = Vec2(next[kSX], next[kSY]) - spline.position(p);
    const Vec2 dc = spline.derivative(p);
    QpVecX grad_d = QpVecX::Zero();
    grad_d[kSX] = 2.0 * e.x();
    grad_d[kSY] = 2.0 * e.y();
    grad_d[kSP] = -2.0 * e.dot(dc);
    s.G.row(r) = grad_d.transpose() * t;
    s.G(r, o + kIS) -= 1.0;
    s.h[r] = w2 - e.squaredNorm() + u[k][kIS];
    ++r;
  }
  return st;
}

MpcResult MpcSolver::solve(const MpcState& x_in, const CenterlineSpline& spline) {
  if (!x_in.allFinite()) throw Error(ErrorCode::NonFiniteState, "MPC initial state is not finite");
  const int n = cfg_.horizon;
  MpcState x0 = x_in;
  x0[kSDelta] = std::clamp(x0[kSDelta], -cfg_.delta_max, cfg_.delta_max);
  x0[kSD] = std::clamp(x0[kSD], -100.0, 100.0);
  x0[kSP] = std::clamp(x0[kSP], 0.0, spline.length());

  std::vector<MpcInput> u;
  if (static_cast<int>(warm_.size()) == n) {
    u = warm_;
  } else {
    u.assign(static_cast<std::size_t>(n), MpcInput::Zero());
    for (MpcInput& uk : u) uk[kIdP] = std::max(0.0, x0[kSVx]);
  }
  const auto set_min_slack = [&](std::vector<MpcInput>& v, const std::vector<MpcState>& traj) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double p = std::clamp(traj[k + 1][kSP], 0.0, spline.length());
      const double d = (Vec2(traj[k + 1][kSX], traj[k + 1][kSY]) - spline.position(p)).squaredNorm();
      v[k][kIS] = minimal_slack(d, cfg_.corridor);
    }
  };
  project_feasible(x0, u, spline);
  std::vector<MpcState> traj = rollout(x0, u);
  set_min_slack(u, traj);
  double j = objective_raw(x0, u, spline);

  MpcResult res;
  res.objective_history.push_back(j);
  for (int it = 0; it < cfg_.max_iterations; ++it) {
    const std::vector<QpStage> qp = build_qp(x0, u, traj, spline);
    const QpSolution step = solve_ocp_qp(qp, cfg_.qp);
    double norm = 0.0;
    double slope = 0.0;
    for (int k = 0; k < n; ++k) {
      norm = std::max(norm, step.u[k].cwiseAbs().maxCoeff());
      QpVecZ z;
      z << step.x[k], step.u[k];
      slope += qp[k].w.dot(z);
    }
    res.iterations = it + 1;
    res.kkt = norm;
    if (norm < cfg_.kkt_tol || slope >= 0.0) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 12; ++ls, alpha *= 0.5) {
      std::vector<MpcInput> cand = u;
      for (int k = 0; k < n; ++k) cand[k] += alpha * step.u[k];
      project_feasible(x0, cand, spline);
      std::vector<MpcState> cand_traj = rollout(x0, cand);
      set_min_slack(cand, cand_traj);
      const double jc = objective_raw(x0, cand, spline);
      if (jc <= j + 1e-4 * alpha * slope) {
        u = std::move(cand);
        traj = std::move(cand_traj);
        j = jc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    res.objective_history.push_back(j);
  }

  res.inputs = u;
  res.trajectory = traj;
  res.delta_cmd = traj[1][kSDelta];
  res.D_cmd = traj[1][kSD];
  for (const MpcInput& uk : u) res.slack_max = std::max(res.slack_max, uk[kIS]);

  // Hot start: shift by one stage, repeat the last input.
  warm_.assign(u.begin() + 1, u.end());
  warm_.push_back(u.back());
  return res;
}

}  // namespace fsd::control
