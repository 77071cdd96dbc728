#pragma once

#include <array>
#include <vector>

#include "fsd/core/cone.hpp"
#include "fsd/core/geometry.hpp"

namespace fsd::planning {

/// Pair of cones the car should pass between.
struct Gate {
  std::size_t a{0};
  std::size_t b{0};
  Vec2 pa{Vec2::Zero()};
  Vec2 pb{Vec2::Zero()};
  ConeColor ca{ConeColor::Unknown};
  ConeColor cb{ConeColor::Unknown};
  Vec2 center{Vec2::Zero()};
  double width{0.0};

  [[nodiscard]] bool is_finish() const { return ca == ConeColor::OrangeLarge && cb == ConeColor::OrangeLarge; }
  /// True if the two gates have a cone in common (positions within `tol`).
  [[nodiscard]] bool shares_cone(const Gate& other, double tol = 0.05) const;
};

struct GateCostWeights {
  double distance{1.0};
  double width{0.5};
  double nominal_width{3.0};
  double heading{2.0};
  double pass{1.0};
  std::array<double, 4> color_tiers{0.0, 5.0, 20.0, 50.0};  // correct, uncertain, same color, inverted
  double search_radius{8.0};
  double min_pair_distance{1.5};
  double max_pair_distance{6.0};
};

/// All cone pairs whose separation lies in [min, max]. Throws TooFewCones for fewer than 2 cones.
std::vector<Gate> build_gates(const std::vector<Cone>& cones, const GateCostWeights& w = {});

struct GateCostTerms {
  double distance{0.0};
  double width{0.0};
  double heading{0.0};
  double pass{0.0};
  double color{0.0};

  [[nodiscard]] double total() const { return distance + width + heading + pass + color; }
};

/// Color tier index (0 correct .. 3 inverted) when driving through g from `from`.
int color_tier(const Gate& g, const Vec2& from);

/// Cost of driving from prev1 (having come from prev2) through g.
GateCostTerms gate_cost_terms(const Gate& g, const Vec2& prev2, const Vec2& prev1, const GateCostWeights& w);
inline double gate_cost(const Gate& g, const Vec2& prev2, const Vec2& prev1, const GateCostWeights& w) {
  return gate_cost_terms(g, prev2, prev1, w).total();
}

bool segments_cross(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b);

}  // namespace fsd::planning
