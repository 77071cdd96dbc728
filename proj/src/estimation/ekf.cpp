#include "fsd/estimation/ekf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <stdexcept>

#include "fsd/core/error.hpp"

namespace fsd::est {

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double chi2_quantile(int dof, double p) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(dist, p);
}

}  // namespace

StateVec rigid_body_derivative(const StateVec& x) {
  const double c = std::cos(x[kPsi]);
  const double s = std::sin(x[kPsi]);
  StateVec d = StateVec::Zero();
  d[kX] = c * x[kVx] - s * x[kVy];
  d[kY] = s * x[kVx] + c * x[kVy];
  d[kPsi] = x[kR];
  d[kVx] = x[kAx] + x[kR] * x[kVy];
  d[kVy] = x[kAy] - x[kR] * x[kVx];
  return d;
}

StateMat rigid_body_jacobian(const StateVec& x) {
  const double c = std::cos(x[kPsi]);
  const double s = std::sin(x[kPsi]);
  StateMat a = StateMat::Zero();
  a(kX, kPsi) = -s * x[kVx] - c * x[kVy];
  a(kX, kVx) = c;
  a(kX, kVy) = -s;
  a(kY, kPsi) = c * x[kVx] - s * x[kVy];
  a(kY, kVx) = s;
  a(kY, kVy) = c;
  a(kPsi, kR) = 1.0;
  a(kVx, kAx) = 1.0;
  a(kVx, kR) = x[kVy];
  a(kVx, kVy) = x[kR];
  a(kVy, kAy) = 1.0;
  a(kVy, kR) = -x[kVx];
  a(kVy, kVx) = -x[kR];
  return a;
}

StateVec kinematic_derivative(const StateVec& x, double steering, const BicycleParams& p) {
  const double wheelbase = p.l_f + p.l_r;
  const double tan_d = std::tan(steering);
  StateVec d = rigid_body_derivative(x);
  d[kVy] = (x[kVx] * p.l_r * tan_d / wheelbase - x[kVy]) / p.relax_time;
  d[kR] = (x[kVx] * tan_d / wheelbase - x[kR]) / p.relax_time;
  return d;
}

StateMat kinematic_jacobian(const StateVec& x, double steering, const BicycleParams& p) {
  const double wheelbase = p.l_f + p.l_r;
  const double tan_d = std::tan(steering);
  StateMat a = rigid_body_jacobian(x);
  a.row(kVy).setZero();
  a(kVy, kVx) = p.l_r * tan_d / wheelbase / p.relax_time;
  a(kVy, kVy) = -1.0 / p.relax_time;
  a.row(kR).setZero();
  a(kR, kVx) = tan_d / wheelbase / p.relax_time;
  a(kR, kR) = -1.0 / p.relax_time;
  return a;
}

StateVec propagate_mean(const StateVec& x, double dt, ProcessModelKind model, double steering,
                        const BicycleParams& p, StateMat* jacobian) {
  auto f = [&](const StateVec& s) {
    return model == ProcessModelKind::RigidBody ? rigid_body_derivative(s) : kinematic_derivative(s, steering, p);
  };
  auto jac = [&](const StateVec& s) {
    return model == ProcessModelKind::RigidBody ? rigid_body_jacobian(s) : kinematic_jacobian(s, steering, p);
  };

  const double h = dt;
  const StateVec k1 = f(x);
  const StateVec x2 = x + 0.5 * h * k1;
  const StateVec k2 = f(x2);
  const StateVec x3 = x + 0.5 * h * k2;
  const StateVec k3 = f(x3);
  const StateVec x4 = x + h * k3;
  const StateVec k4 = f(x4);
  StateVec next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  if (jacobian != nullptr) {
    const StateMat eye = StateMat::Identity();
    const StateMat j1 = jac(x);
    const StateMat j2 = jac(x2) * (eye + 0.5 * h * j1);
    const StateMat j3 = jac(x3) * (eye + 0.5 * h * j2);
    const StateMat j4 = jac(x4) * (eye + h * j3);
    *jacobian = eye + h / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
  }
  return next;
}

EkfState predict(const EkfState& state, double dt, ProcessModelKind model, const StateVec& process_noise,
                 double steering, const BicycleParams& bicycle) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("predict: dt must lie in (0, 0.1]");

  StateMat f;
  EkfState out;
  out.mean = propagate_mean(state.mean, dt, model, steering, bicycle, &f);
  if (!out.mean.allFinite()) throw Error(ErrorCode::NonFiniteState, "propagated mean is not finite");
  out.mean[kPsi] = wrap_angle(out.mean[kPsi]);

  StateMat q = StateMat::Zero();
  q.diagonal() = process_noise * dt;
  out.cov = f * state.cov * f.transpose() + q;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  if (!out.cov.allFinite()) throw Error(ErrorCode::NonFiniteState, "propagated covariance is not finite");
  out.t = state.t + dt;
  return out;
}

Vec2 predicted_gss_velocity(const StateVec& x, const Vec2& lever_arm) {
  // v + omega x p for a planar rigid body: r * (-p_y, p_x).
  return {x[kVx] - x[kR] * lever_arm.y(), x[kVy] + x[kR] * lever_arm.x()};
}

MeasurementModel measurement_model(const StateVec& x, const Measurement& m, const Vec2& gss_lever_arm) {
  MeasurementModel mm;
  std::visit(Overloaded{
                 [&](const GnssPose& g) {
                   mm.h = Eigen::Vector3d(x[kX], x[kY], x[kPsi]);
                   mm.H = Eigen::MatrixXd::Zero(3, kStateDim);
                   mm.H(0, kX) = mm.H(1, kY) = mm.H(2, kPsi) = 1.0;
                   mm.z = g.z;
                   mm.R = g.cov;
                   mm.angle_index = 2;
                   mm.t = g.t;
                 },
                 [&](const GnssVel& g) {
                   mm.h = Vec2(x[kVx], x[kVy]);
                   mm.H = Eigen::MatrixXd::Zero(2, kStateDim);
                   mm.H(0, kVx) = mm.H(1, kVy) = 1.0;
                   mm.z = g.z;
                   mm.R = g.cov;
                   mm.t = g.t;
                 },
                 [&](const ImuAccel& a) {
                   mm.h = Vec2(x[kAx], x[kAy]);
                   mm.H = Eigen::MatrixXd::Zero(2, kStateDim);
                   mm.H(0, kAx) = mm.H(1, kAy) = 1.0;
                   mm.z = a.z;
                   mm.R = a.cov;
                   mm.t = a.t;
                 },
                 [&](const ImuYawRate& r) {
                   mm.h = Eigen::VectorXd::Constant(1, x[kR]);
                   mm.H = Eigen::MatrixXd::Zero(1, kStateDim);
                   mm.H(0, kR) = 1.0;
                   mm.z = Eigen::VectorXd::Constant(1, r.z);
                   mm.R = Eigen::MatrixXd::Constant(1, 1, r.var);
                   mm.t = r.t;
                 },
                 [&](const GssVel& g) {
                   mm.h = predicted_gss_velocity(x, gss_lever_arm);
                   mm.H = Eigen::MatrixXd::Zero(2, kStateDim);
                   mm.H(0, kVx) = 1.0;
                   mm.H(0, kR) = -gss_lever_arm.y();
                   mm.H(1, kVy) = 1.0;
                   mm.H(1, kR) = gss_lever_arm.x();
                   mm.z = g.z;
                   mm.R = g.cov;
                   mm.t = g.t;
                 },
             },
             m);
  return mm;
}

UpdateResult update(const EkfState& state, const Measurement& m, const Vec2& gss_lever_arm,
                    double gate_probability) {
  const MeasurementModel mm = measurement_model(state.mean, m, gss_lever_arm);
  if (mm.t < state.t - 1e-9) throw std::invalid_argument("update: measurement older than state");

  Eigen::VectorXd innovation = mm.z - mm.h;
  if (mm.angle_index >= 0) innovation[mm.angle_index] = wrap_angle(innovation[mm.angle_index]);

  const Eigen::MatrixXd s = mm.H * state.cov * mm.H.transpose() + mm.R;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * scale) {
    throw Error(ErrorCode::SingularInnovation, "innovation covariance is not invertible");
  }

  UpdateResult result{state, UpdateOutcome::Applied, 0.0};
  result.mahalanobis = innovation.dot(ldlt.solve(innovation));
  const double gate = chi2_quantile(static_cast<int>(innovation.size()), gate_probability);
  if (result.mahalanobis > gate) {
    result.outcome = UpdateOutcome::Rejected;
    return result;
  }

  // K = P H^T S^-1 computed through the symmetric solve.
  const Eigen::MatrixXd k = ldlt.solve(mm.H * state.cov).transpose();
  EkfState& out = result.state;
  out.mean = state.mean + k * innovation;
  out.mean[kPsi] = wrap_angle(out.mean[kPsi]);
  const StateMat i_kh = StateMat::Identity() - k * mm.H;
  out.cov = i_kh * state.cov * i_kh.transpose() + k * mm.R * k.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.t = std::max(state.t, mm.t);
  return result;
}

bool uses_gnss(const Measurement& m) {
  return std::holds_alternative<GnssPose>(m) || std::holds_alternative<GnssVel>(m);
}
bool uses_gss(const Measurement& m) { return std::holds_alternative<GssVel>(m); }
bool uses_imu(const Measurement& m) {
  return std::holds_alternative<ImuAccel>(m) || std::holds_alternative<ImuYawRate>(m);
}

StepResult step(const EkfState& state, const SensorStatus& status, const std::vector<Measurement>& measurements,
                double dt, const EkfConfig& config, double steering) {
  if (!status.imu_ok && !status.gnss_ok && !status.gss_ok) {
    throw Error(ErrorCode::TerminalSensorFault, "GNSS, GSS and IMU all failed");
  }

  StepResult result;
  result.model = (status.gnss_ok || status.gss_ok) ? ProcessModelKind::RigidBody : ProcessModelKind::KinematicBicycle;
  StateVec q = config.process_noise;
  if (result.model == ProcessModelKind::KinematicBicycle) {
    q[kVy] += config.kinematic_noise;
    q[kR] += config.kinematic_noise;
  }
  result.state = predict(state, dt, result.model, q, steering, config.bicycle);

  for (const Measurement& m : measurements) {
    if (uses_gnss(m) && !status.gnss_ok) continue;
    if (uses_gss(m) && !status.gss_ok) continue;
    if (uses_imu(m) && !status.imu_ok) continue;
    UpdateResult u = update(result.state, m, config.gss_lever_arm, config.gate_probability);
    if (u.outcome == UpdateOutcome::Applied) {
      result.state = std::move(u.state);
      ++result.applied;
    } else {
      ++result.rejected;
    }
  }
  return result;
}

double asymmetry(const StateMat& p) { return (p - p.transpose()).cwiseAbs().maxCoeff(); }

double min_eigenvalue(const StateMat& p) {
  Eigen::SelfAdjointEigenSolver<StateMat> es(0.5 * (p + p.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace fsd::est
