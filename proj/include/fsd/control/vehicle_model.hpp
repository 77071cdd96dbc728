#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace fsd::control {

inline constexpr int kMpcNx = 9;  // X, Y, vx, vy, theta, r, p, delta, D
inline constexpr int kMpcNdu = 3;  // phi, dD, dp

enum MpcStateIndex : int { kSX = 0, kSY, kSVx, kSVy, kSTheta, kSR, kSP, kSDelta, kSD };
enum MpcRateIndex : int { kUPhi = 0, kUdD, kUdP };

struct VehicleParams {
  double mass{190.0};
  double l_f{0.765};
  double l_r{0.765};
  double iz{110.0};
  double axle_stiffness{2.0 * 5000.0};  // N/rad per axle
  double max_accel{10.0};
  double blend_low{3.0};
  double blend_high{6.0};
  double brake_fade_speed{0.3};  // m/s, braking force fades to zero at standstill

  [[nodiscard]] double wheelbase() const { return l_f + l_r; }
};

/// Dynamic-model share of the blended derivative.
inline double blend_alpha(double vx, const VehicleParams& p) {
  return std::clamp((vx - p.blend_low) / (p.blend_high - p.blend_low), 0.0, 1.0);
}

namespace detail {
inline double value_of(double v) { return v; }
template <typename T>
double value_of(const T& v) {
  return v.value();
}
}  // namespace detail

/// Longitudinal force for throttle D in percent. Negative D brakes and fades out at standstill.
template <typename T>
T drive_force(const T& d, const T& vx, const VehicleParams& p) {
  using std::tanh;
  T f = d / 100.0 * p.max_accel * p.mass;
  if (detail::value_of(d) < 0.0) f = f * tanh(vx / p.brake_fade_speed);
  return f;
}

/// Blended kinematic/dynamic bicycle derivative of the augmented state.
template <typename T>
Eigen::Matrix<T, kMpcNx, 1> blended_derivative(const Eigen::Matrix<T, kMpcNx, 1>& x,
                                               const Eigen::Matrix<T, kMpcNdu, 1>& du, const VehicleParams& p) {
  using std::atan2;
  using std::cos;
  using std::sin;
  const T& vx = x[kSVx];
  const T& vy = x[kSVy];
  const T& th = x[kSTheta];
  const T& r = x[kSR];
  const T& delta = x[kSDelta];
  const T& phi = du[kUPhi];

  const T force = drive_force(x[kSD], vx, p);
  const T ax = force / p.mass;
  const double wb = p.wheelbase();

  // Kinematic model: vy and r follow the steering geometry.
  const T vx_dot_kin = ax;
  const T vy_dot_kin = p.l_r / wb * (phi * vx + delta * ax);
  const T r_dot_kin = 1.0 / wb * (phi * vx + delta * ax);

  Eigen::Matrix<T, kMpcNx, 1> dx;
  dx[kSX] = vx * cos(th) - vy * sin(th);
  dx[kSY] = vx * sin(th) + vy * cos(th);
  dx[kSTheta] = r;
  dx[kSP] = du[kUdP];
  dx[kSDelta] = phi;
  dx[kSD] = du[kUdD];

  const double alpha = blend_alpha(detail::value_of(vx), p);
  if (alpha <= 0.0) {
    dx[kSVx] = vx_dot_kin;
    dx[kSVy] = vy_dot_kin;
    dx[kSR] = r_dot_kin;
    return dx;
  }

  // Dynamic model with linear tyres. alpha > 0 implies vx > blend_low, so the slip angles are well defined.
  const T alpha_f = delta - atan2(vy + p.l_f * r, vx);
  const T alpha_r = -atan2(vy - p.l_r * r, vx);
  const T f_f = p.axle_stiffness * alpha_f;
  const T f_r = p.axle_stiffness * alpha_r;
  const T vx_dot_dyn = (force - f_f * sin(delta)) / p.mass + vy * r;
  const T vy_dot_dyn = (f_r + f_f * cos(delta)) / p.mass - vx * r;
  const T r_dot_dyn = (p.l_f * f_f * cos(delta) - p.l_r * f_r) / p.iz;

  const T a = alpha < 1.0 ? T((vx - p.blend_low) / (p.blend_high - p.blend_low)) : T(1.0);
  const T one_minus = 1.0 - a;
  dx[kSVx] = one_minus * vx_dot_kin + a * vx_dot_dyn;
  dx[kSVy] = one_minus * vy_dot_kin + a * vy_dot_dyn;
  dx[kSR] = one_minus * r_dot_kin + a * r_dot_dyn;
  return dx;
}

template <typename T>
Eigen::Matrix<T, kMpcNx, 1> rk4_step(const Eigen::Matrix<T, kMpcNx, 1>& x, const Eigen::Matrix<T, kMpcNdu, 1>& du,
                                     double dt, const VehicleParams& p) {
  const auto k1 = blended_derivative<T>(x, du, p);
  const auto k2 = blended_derivative<T>((x + 0.5 * dt * k1).eval(), du, p);
  const auto k3 = blended_derivative<T>((x + 0.5 * dt * k2).eval(), du, p);
  const auto k4 = blended_derivative<T>((x + dt * k3).eval(), du, p);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

using MpcState = Eigen::Matrix<double, kMpcNx, 1>;
using MpcRates = Eigen::Matrix<double, kMpcNdu, 1>;

/// One-step map and its Jacobians A = dx+/dx, B = dx+/du.
MpcState linearize_step(const MpcState& x, const MpcRates& du, double dt, const VehicleParams& p,
                        Eigen::Matrix<double, kMpcNx, kMpcNx>* a, Eigen::Matrix<double, kMpcNx, kMpcNdu>* b);

}  // namespace fsd::control
