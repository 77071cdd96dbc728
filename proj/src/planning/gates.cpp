#include "fsd/planning/gates.hpp"

#include "fsd/core/error.hpp"

namespace fsd::planning {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// 0 consistent with the side, 1 unknown, 2 wrong side.
int side_score(ConeColor c, bool left) {
  switch (c) {
    case ConeColor::Blue: return left ? 0 : 2;
    case ConeColor::Yellow: return left ? 2 : 0;
    case ConeColor::OrangeSmall:
    case ConeColor::OrangeLarge: return 0;
    case ConeColor::Unknown: return 1;
  }
  return 1;
}

bool is_orange(ConeColor c) { return c == ConeColor::OrangeSmall || c == ConeColor::OrangeLarge; }

}  // namespace

bool Gate::shares_cone(const Gate& other, double tol) const {
  const double t2 = tol * tol;
  for (const Vec2* p : {&pa, &pb}) {
    for (const Vec2* q : {&other.pa, &other.pb}) {
      if ((*p - *q).squaredNorm() <= t2) return true;
    }
  }
  return false;
}

std::vector<Gate> build_gates(const std::vector<Cone>& cones, const GateCostWeights& w) {
  if (cones.size() < 2) throw Error(ErrorCode::TooFewCones, "need at least two cones to form a gate");
  std::vector<Gate> gates;
  for (std::size_t i = 0; i < cones.size(); ++i) {
    for (std::size_t j = i + 1; j < cones.size(); ++j) {
      const double d = (cones[i].position - cones[j].position).norm();
      if (d < w.min_pair_distance || d > w.max_pair_distance) continue;
      Gate g;
      g.a = i;
      g.b = j;
      g.pa = cones[i].position;
      g.pb = cones[j].position;
      g.ca = cones[i].color;
      g.cb = cones[j].color;
      g.center = 0.5 * (g.pa + g.pb);
      g.width = d;
      gates.push_back(g);
    }
  }
  return gates;
}

int color_tier(const Gate& g, const Vec2& from) {
  const Vec2 dir = g.center - from;
  const bool a_left = cross2(dir, g.pa - g.center) > 0.0;
  int sa = side_score(g.ca, a_left);
  int sb = side_score(g.cb, !a_left);
  // Orange marks a line across the track, so orange next to a side cone says nothing about the side.
  if (is_orange(g.ca) != is_orange(g.cb)) {
    if (is_orange(g.ca)) sa = 1;
    if (is_orange(g.cb)) sb = 1;
  }
  const int wrong = (sa == 2 ? 1 : 0) + (sb == 2 ? 1 : 0);
  if (wrong == 2) return 3;
  if (wrong == 1) return 2;
  if (sa == 1 || sb == 1) return 1;
  return 0;
}

GateCostTerms gate_cost_terms(const Gate& g, const Vec2& prev2, const Vec2& prev1, const GateCostWeights& w) {
  GateCostTerms t;
  const Vec2 d = g.center - prev1;
  const double dist = d.norm();
  t.distance = w.distance * dist;
  t.width = w.width * std::abs(g.width - w.nominal_width);
  const Vec2 before = prev1 - prev2;
  if (before.norm() > 1e-9 && dist > 1e-9) {
    t.heading = w.heading * std::abs(std::atan2(cross2(before, d), before.dot(d)));
  }
  const Vec2 line = g.pb - g.pa;
  const Vec2 normal(-line.y(), line.x());
  if (dist > 1e-9) {
    const double c = std::min(1.0, std::abs(d.dot(normal)) / (dist * normal.norm()));
    t.pass = w.pass * std::acos(c);
  }
  t.color = w.color_tiers[static_cast<std::size_t>(color_tier(g, prev1))];
  return t;
}

bool segments_cross(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double d1 = cross2(q - p, a - p);
  const double d2 = cross2(q - p, b - p);
  const double d3 = cross2(b - a, p - a);
  const double d4 = cross2(b - a, q - a);
  return ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
}

}  // namespace fsd::planning
