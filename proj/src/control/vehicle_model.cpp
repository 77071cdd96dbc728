#include "fsd/control/vehicle_model.hpp"

#include <unsupported/Eigen/AutoDiff>

namespace fsd::control {

MpcState linearize_step(const MpcState& x, const MpcRates& du, double dt, const VehicleParams& p,
                        Eigen::Matrix<double, kMpcNx, kMpcNx>* a, Eigen::Matrix<double, kMpcNx, kMpcNdu>* b) {
  if (a == nullptr && b == nullptr) return rk4_step<double>(x, du, dt, p);
  constexpr int kN = kMpcNx + kMpcNdu;
  using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, kN, 1>>;
  Eigen::Matrix<Ad, kMpcNx, 1> xa;
  Eigen::Matrix<Ad, kMpcNdu, 1> ua;
  for (int i = 0; i < kMpcNx; ++i) xa[i] = Ad(x[i], kN, i);
  for (int i = 0; i < kMpcNdu; ++i) ua[i] = Ad(du[i], kN, kMpcNx + i);
  const Eigen::Matrix<Ad, kMpcNx, 1> next = rk4_step<Ad>(xa, ua, dt, p);
  MpcState out;
  for (int i = 0; i < kMpcNx; ++i) {
    out[i] = next[i].value();
    if (a != nullptr) a->row(i) = next[i].derivatives().head<kMpcNx>().transpose();
    if (b != nullptr) b->row(i) = next[i].derivatives().tail<kMpcNdu>().transpose();
  }
  return out;
}

}  // namespace fsd::control
