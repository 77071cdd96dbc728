#include "fsd/control/spline.hpp"

#include "fsd/core/error.hpp"

namespace fsd::control {

CenterlineSpline CenterlineSpline::through(const std::vector<Vec2>& points) {
  CenterlineSpline sp;
  for (const Vec2& p : points) {
    if (sp.pts_.empty() || (p - sp.pts_.back()).norm() > 1e-9) sp.pts_.push_back(p);
  }
  if (sp.pts_.size() < 2) throw std::invalid_argument("spline needs at least two distinct points");
  const std::size_t n = sp.pts_.size();
  sp.s_.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) sp.s_[i] = sp.s_[i - 1] + (sp.pts_[i] - sp.pts_[i - 1]).norm();

  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = sp.s_[i + 1] - sp.s_[i];

  for (int k = 0; k < 2; ++k) {
    // Natural spline second derivatives m by the Thomas algorithm.
    std::vector<double> m(n, 0.0);
    if (n > 2) {
      std::vector<double> diag(n - 2), rhs(n - 2), upper(n - 2), lower(n - 2);
      for (std::size_t i = 1; i + 1 < n; ++i) {
        const std::size_t r = i - 1;
        lower[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        upper[r] = h[i];
        rhs[r] = 6.0 * ((sp.pts_[i + 1][k] - sp.pts_[i][k]) / h[i] - (sp.pts_[i][k] - sp.pts_[i - 1][k]) / h[i - 1]);
      }
      for (std::size_t r = 1; r < diag.size(); ++r) {
        const double f = lower[r] / diag[r - 1];
        diag[r] -= f * upper[r - 1];
        rhs[r] -= f * rhs[r - 1];
      }
      for (std::size_t r = diag.size(); r-- > 0;) {
        const double next = r + 1 < diag.size() ? m[r + 2] : 0.0;
        m[r + 1] = (rhs[r] - upper[r] * next) / diag[r];
      }
    }
    sp.coeffs_[k].resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double y0 = sp.pts_[i][k];
      const double y1 = sp.pts_[i + 1][k];
      sp.coeffs_[k][i] = {y0, (y1 - y0) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0, 0.5 * m[i],
                          (m[i + 1] - m[i]) / (6.0 * h[i])};
    }
  }
  return sp;
}

CenterlineSpline CenterlineSpline::resampled(const std::vector<Vec2>& polyline, double spacing, bool closed,
                                             int laps) {
  std::vector<Vec2> line;
  const int reps = closed ? std::max(1, laps) : 1;
  for (int l = 0; l < reps; ++l) {
    for (const Vec2& p : polyline) line.push_back(p);
  }
  if (closed && !polyline.empty()) line.push_back(polyline.front());
  std::vector<Vec2> clean;
  for (const Vec2& p : line) {
    if (clean.empty() || (p - clean.back()).norm() > 1e-9) clean.push_back(p);
  }
  if (clean.size() < 2) throw std::invalid_argument("spline needs at least two distinct points");

  std::vector<Vec2> samples{clean.front()};
  double carry = 0.0;  // distance since last sample
  for (std::size_t i = 1; i < clean.size(); ++i) {
    const Vec2 a = clean[i - 1];
    const Vec2 b = clean[i];
    const double seg = (b - a).norm();
    double pos = spacing - carry;
    while (pos <= seg) {
      samples.push_back(a + (b - a) * (pos / seg));
      pos += spacing;
    }
    carry = seg - (pos - spacing);
  }
  if ((clean.back() - samples.back()).norm() > 0.25 * spacing) {
    samples.push_back(clean.back());
  } else if (samples.size() > 1) {
    samples.back() = clean.back();
  } else {
    samples.push_back(clean.back());
  }
  return through(samples);
}

std::size_t CenterlineSpline::segment(double s) const {
  if (s <= s_.front()) return 0;
  if (s >= s_.back()) return s_.size() - 2;
  const auto it = std::upper_bound(s_.begin(), s_.end(), s);
  return static_cast<std::size_t>(it - s_.begin()) - 1;
}

Vec2 CenterlineSpline::derivative(double s) const {
  const std::size_t i = segment(s);
  const double t = s - s_[i];
  Vec2 out;
  for (int k = 0; k < 2; ++k) {
    const Coeffs& c = coeffs_[k][i];
    out[k] = c.b + t * (2.0 * c.c + 3.0 * c.d * t);
  }
  return out;
}

Vec2 CenterlineSpline::second_derivative(double s) const {
  const std::size_t i = segment(s);
  const double t = s - s_[i];
  Vec2 out;
  for (int k = 0; k < 2; ++k) {
    const Coeffs& c = coeffs_[k][i];
    out[k] = 2.0 * c.c + 6.0 * c.d * t;
  }
  return out;
}

double CenterlineSpline::heading(double s) const {
  const Vec2 d = derivative(s);
  return std::atan2(d.y(), d.x());
}

double project_progress(const CenterlineSpline& spline, const Vec2& pos, double guess, double bracket) {
  double lo = std::max(0.0, guess - bracket);
  double hi = std::min(spline.length(), guess + bracket);
  if (hi <= lo) return std::clamp(guess, 0.0, spline.length());
  const auto f = [&](double s) { return (spline.position(s) - pos).squaredNorm(); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = f(a);
  double fb = f(b);
  while (hi - lo > 1e-6) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = f(b);
    }
  }
  return 0.5 * (lo + hi);
}

CorridorTerms corridor_terms(const Vec2& position, double p, const CenterlineSpline& spline, double slack,
                             double half_width) {
  if (p < -1e-9 || p > spline.length() + 1e-9) {
    throw Error(ErrorCode::ProgressOutOfDomain, "progress outside the spline domain");
  }
  CorridorTerms t;
  t.d = (position - spline.position(p)).squaredNorm();
  t.residual = t.d - half_width * half_width - slack;
  return t;
}

}  // namespace fsd::control
