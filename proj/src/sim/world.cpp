#include "fsd/sim/world.hpp"

#include <algorithm>
#include <cmath>

namespace fsd::sim {

namespace {

constexpr double kGravity = 9.81;

double lateral_force(double slip, double fz, const TruthParams& p, double stiffness) {
  const double peak = p.mu * fz;
  return peak * std::tanh(stiffness * slip / peak);
}

}  // namespace

double truth_drive_force(double D, double vx, const TruthParams& p) {
  double f = D / 100.0 * p.max_accel * p.mass;
  if (D > 0.0) {
    f *= std::clamp((p.speed_limit - vx) / p.limiter_band, 0.0, 1.0);
  } else {
    f *= std::tanh(std::max(vx, 0.0) / p.brake_fade_speed);
  }
  return f;
}

TruthDerivative truth_derivative(const TruthState& s, const TruthParams& p) {
  const double c = std::cos(s.psi);
  const double sn = std::sin(s.psi);
  TruthDerivative d{};
  d.x = c * s.vx - sn * s.vy;
  d.y = sn * s.vx + c * s.vy;
  d.psi = s.r;

  const double fx = truth_drive_force(s.D, s.vx, p) - p.drag * s.vx * std::abs(s.vx);
  const double wb = p.wheelbase();

  // Kinematic branch: relax toward rolling-without-slip values.
  const double r_kin = s.vx * std::tan(s.delta) / wb;
  const double vy_kin = p.l_r * r_kin;
  const double vx_dot_kin = fx / p.mass;
  const double vy_dot_kin = (vy_kin - s.vy) / p.kinematic_tau;
  const double r_dot_kin = (r_kin - s.r) / p.kinematic_tau;

  const double alpha = std::clamp((s.vx - p.blend_low) / (p.blend_high - p.blend_low), 0.0, 1.0);
  if (alpha <= 0.0) {
    d.vx = vx_dot_kin;
    d.vy = vy_dot_kin;
    d.r = r_dot_kin;
    return d;
  }

  const double fz_f = p.mass * kGravity * p.l_r / wb;
  const double fz_r = p.mass * kGravity * p.l_f / wb;
  const double slip_f = s.delta - std::atan2(s.vy + p.l_f * s.r, s.vx);
  const double slip_r = -std::atan2(s.vy - p.l_r * s.r, s.vx);
  const double f_f = lateral_force(slip_f, fz_f, p, p.axle_stiffness);
  const double f_r = lateral_force(slip_r, fz_r, p, p.axle_stiffness);
  const double vx_dot_dyn = (fx - f_f * std::sin(s.delta)) / p.mass + s.vy * s.r;
  const double vy_dot_dyn = (f_r + f_f * std::cos(s.delta)) / p.mass - s.vx * s.r;
  const double r_dot_dyn = (p.l_f * f_f * std::cos(s.delta) - p.l_r * f_r) / p.iz;

  d.vx = (1.0 - alpha) * vx_dot_kin + alpha * vx_dot_dyn;
  d.vy = (1.0 - alpha) * vy_dot_kin + alpha * vy_dot_dyn;
  d.r = (1.0 - alpha) * r_dot_kin + alpha * r_dot_dyn;
  return d;
}

TruthState physics_step(const TruthState& s, const ControlCommand& cmd, double dt, const TruthParams& p,
                        const ActuatorModel& a) {
  TruthState out = s;
  const double target = std::clamp(cmd.delta, -a.delta_max, a.delta_max);
  const double max_move = a.steer_rate() * dt;
  const double gap = target - s.delta;
  // Snap within rounding of the last increment so a full sweep takes exactly steer_full_time.
  out.delta = std::abs(gap) <= max_move * (1.0 + 1e-9) ? target : s.delta + std::copysign(max_move, gap);
  out.D = std::clamp(cmd.D, -100.0, 100.0);

  const auto shifted = [&](const TruthState& base, const TruthDerivative& k, double h) {
    TruthState t = base;
    t.x += h * k.x;
    t.y += h * k.y;
    t.psi += h * k.psi;
    t.vx += h * k.vx;
    t.vy += h * k.vy;
    t.r += h * k.r;
    return t;
  };
  const TruthDerivative k1 = truth_derivative(out, p);
  const TruthDerivative k2 = truth_derivative(shifted(out, k1, 0.5 * dt), p);
  const TruthDerivative k3 = truth_derivative(shifted(out, k2, 0.5 * dt), p);
  const TruthDerivative k4 = truth_derivative(shifted(out, k3, dt), p);
  TruthState next = out;
  next.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  next.y += dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
  next.psi = wrap_angle(out.psi + dt / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi));
  next.vx += dt / 6.0 * (k1.vx + 2.0 * k2.vx + 2.0 * k3.vx + k4.vx);
  next.vy += dt / 6.0 * (k1.vy + 2.0 * k2.vy + 2.0 * k3.vy + k4.vy);
  next.r += dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);

  const TruthDerivative dn = truth_derivative(next, p);
  next.ax = dn.vx - next.r * next.vy;
  next.ay = dn.vy + next.r * next.vx;
  return next;
}

TruthState step_world(const TruthState& s, const ControlCommand& cmd, double tick, const TruthParams& p,
                      const ActuatorModel& a, double physics_dt) {
  const long n = std::max(1L, std::lround(tick / physics_dt));
  const double h = tick / static_cast<double>(n);
  TruthState out = s;
  for (long i = 0; i < n; ++i) out = physics_step(out, cmd, h, p, a);
  return out;
}

}  // namespace fsd::sim
