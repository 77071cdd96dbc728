#pragma once

#include <limits>
#include <vector>

#include "fsd/control/ocp_qp.hpp"
#include "fsd/control/spline.hpp"
#include "fsd/control/vehicle_model.hpp"

namespace fsd::control {

struct MpcWeights {
  double q_D{1e-4};
  double q_phi{3.0};
  double q_vx{0.5};
  double q_p{0.1};
  double q_s{150.0};
  double q_d{0.1};
  double q_cap{10.0};    // soft speed cap
  double c_speed{2.0};   // braking-zone speed penalty
};

struct MpcConfig {
  VehicleParams vehicle{};
  MpcWeights weights{};
  int horizon{40};
  double dt{0.05};
  double corridor{0.7};
  double delta_max{0.4};
  double steer_full_time{0.4};  // full left to full right
  double dD_max{400.0};         // percent per second
  double dp_max{20.0};
  double v_cap{std::numeric_limits<double>::infinity()};
  double brake_start{std::numeric_limits<double>::infinity()};  // progress where the braking zone starts
  int max_iterations{30};
  double kkt_tol{1e-4};
  QpOptions qp{};

  [[nodiscard]] double phi_max() const { return 2.0 * delta_max / steer_full_time; }
};

/// Rate input plus corridor slack: (phi, dD, dp, S).
using MpcInput = Eigen::Matrix<double, kQpNu, 1>;
enum MpcInputIndex : int { kIPhi = 0, kIdD, kIdP, kIS };

struct MpcResult {
  std::vector<MpcInput> inputs;
  std::vector<MpcState> trajectory;  // H + 1 states
  double delta_cmd{0.0};
  double D_cmd{0.0};
  int iterations{0};
  double kkt{0.0};
  bool converged{false};
  std::vector<double> objective_history;
  double slack_max{0.0};
};

/// Minimal slack for a squared distance d and corridor half-width w.
inline double minimal_slack(double d, double w) { return std::max(0.0, d - w * w); }

class MpcSolver {
 public:
  explicit MpcSolver(MpcConfig cfg);

  /// x0: X, Y, vx, vy, theta, r, p, delta, D. Warm-starts from the previous call.
  MpcResult solve(const MpcState& x0, const CenterlineSpline& spline);

  void reset() { warm_.clear(); }
  [[nodiscard]] const MpcConfig& config() const { return cfg_; }
  MpcConfig& config() { return cfg_; }

  /// Forward simulation of the model; slack entries are ignored.
  [[nodiscard]] std::vector<MpcState> rollout(const MpcState& x0, const std::vector<MpcInput>& u) const;

  /// Objective with each slack replaced by its minimal feasible value.
  [[nodiscard]] double objective(const MpcState& x0, const std::vector<MpcInput>& u,
                                 const CenterlineSpline& spline) const;

  /// Objective with the given slacks, and its gradient w.r.t. all inputs (adjoint).
  [[nodiscard]] double objective_raw(const MpcState& x0, const std::vector<MpcInput>& u,
                                     const CenterlineSpline& spline, std::vector<MpcInput>* grad = nullptr) const;

  /// Linearized QP around (x0, u).
  [[nodiscard]] std::vector<QpStage> build_qp(const MpcState& x0, const std::vector<MpcInput>& u,
                                              const std::vector<MpcState>& traj,
                                              const CenterlineSpline& spline) const;

  /// Clamps inputs so every bound holds exactly along the rollout from x0.
  void project_feasible(const MpcState& x0, std::vector<MpcInput>& u, const CenterlineSpline& spline) const;

 private:
  double stage_state_cost(const MpcState& x, const CenterlineSpline& spline, QpVecX* g, Eigen::Matrix<double, kQpNx, kQpNx>* h) const;
  double stage_input_cost(const MpcInput& u) const;

  MpcConfig cfg_;
  std::vector<MpcInput> warm_;
};

}  // namespace fsd::control
