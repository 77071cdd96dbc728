#pragma once

#include <Eigen/Core>
#include <vector>

namespace fsd::control {

inline constexpr int kQpNx = 9;
inline constexpr int kQpNu = 4;
inline constexpr int kQpNz = kQpNx + kQpNu;
inline constexpr int kQpNc = 13;

using QpVecX = Eigen::Matrix<double, kQpNx, 1>;
using QpVecU = Eigen::Matrix<double, kQpNu, 1>;
using QpVecZ = Eigen::Matrix<double, kQpNz, 1>;
using QpVecC = Eigen::Matrix<double, kQpNc, 1>;

/// One stage of
///   min  sum_k 1/2 z_k' W_k z_k + w_k' z_k,   z_k = (x_k, u_k)
///   s.t. x_{k+1} = A_k x_k + B_k u_k,  x_0 = 0,  G_k z_k <= h_k.
/// x_H is free.
struct QpStage {
  Eigen::Matrix<double, kQpNx, kQpNx> A{Eigen::Matrix<double, kQpNx, kQpNx>::Identity()};
  Eigen::Matrix<double, kQpNx, kQpNu> B{Eigen::Matrix<double, kQpNx, kQpNu>::Zero()};
  Eigen::Matrix<double, kQpNz, kQpNz> W{Eigen::Matrix<double, kQpNz, kQpNz>::Zero()};
  QpVecZ w{QpVecZ::Zero()};
  Eigen::Matrix<double, kQpNc, kQpNz> G{Eigen::Matrix<double, kQpNc, kQpNz>::Zero()};
  QpVecC h{QpVecC::Constant(1e6)};
};

struct QpOptions {
  int max_iterations{60};
  double tol{1e-9};
  double regularization{1e-10};
};

struct QpSolution {
  std::vector<QpVecX> x;  // H + 1
  std::vector<QpVecU> u;  // H
  std::vector<QpVecC> lambda;
  std::vector<QpVecC> slack;
  int iterations{0};
  bool converged{false};
  double mu{0.0};
  double primal_residual{0.0};
  double dual_residual{0.0};
};

/// Primal-dual interior point (Mehrotra predictor-corrector); each Newton
/// system is solved by a Riccati recursion over the stages.
QpSolution solve_ocp_qp(const std::vector<QpStage>& stages, const QpOptions& opt = {});

/// Objective value of a trajectory.
double qp_objective(const std::vector<QpStage>& stages, const QpSolution& sol);

}  // namespace fsd::control
