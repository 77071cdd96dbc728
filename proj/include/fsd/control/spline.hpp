#pragma once

#include <algorithm>
#include <vector>

#include "fsd/control/vehicle_model.hpp"
#include "fsd/core/geometry.hpp"

namespace fsd::control {

/// Natural cubic spline through 2D points, parametrized by cumulative chord length.
class CenterlineSpline {
 public:
  CenterlineSpline() = default;

  /// Interpolates the given points exactly. Needs at least two distinct points.
  static CenterlineSpline through(const std::vector<Vec2>& points);

  /// Resamples a polyline at `spacing` metres and interpolates the samples.
  /// For closed loops the polyline is unrolled `laps` times.
  static CenterlineSpline resampled(const std::vector<Vec2>& polyline, double spacing = 4.0, bool closed = false,
                                    int laps = 1);

  [[nodiscard]] double length() const { return s_.empty() ? 0.0 : s_.back(); }
  [[nodiscard]] bool empty() const { return s_.size() < 2; }
  [[nodiscard]] const std::vector<Vec2>& knots() const { return pts_; }
  [[nodiscard]] const std::vector<double>& params() const { return s_; }

  template <typename T>
  [[nodiscard]] Eigen::Matrix<T, 2, 1> eval(const T& s) const {
    const std::size_t i = segment(detail::value_of(s));
    const T t = s - s_[i];
    Eigen::Matrix<T, 2, 1> out;
    for (int k = 0; k < 2; ++k) {
      const Coeffs& c = coeffs_[k][i];
      out[k] = c.a + t * (c.b + t * (c.c + t * c.d));
    }
    return out;
  }

  [[nodiscard]] Vec2 position(double s) const { return eval<double>(s); }
  [[nodiscard]] Vec2 derivative(double s) const;
  [[nodiscard]] Vec2 second_derivative(double s) const;
  [[nodiscard]] double heading(double s) const;

 private:
  struct Coeffs {
    double a, b, c, d;
  };
  [[nodiscard]] std::size_t segment(double s) const;

  std::vector<Vec2> pts_;
  std::vector<double> s_;
  std::vector<Coeffs> coeffs_[2];
};

/// Parameter of the spline point closest to `pos`, searched by golden section in
/// [guess - bracket, guess + bracket] clipped to the spline domain.
double project_progress(const CenterlineSpline& spline, const Vec2& pos, double guess, double bracket = 5.0);

/// Squared distance d to the centerline at progress p and the corridor residual d - w^2 - S.
struct CorridorTerms {
  double d{0.0};
  double residual{0.0};
};
CorridorTerms corridor_terms(const Vec2& position, double p, const CenterlineSpline& spline, double slack,
                             double half_width = 0.7);

}  // namespace fsd::control
