#include "fsd/planning/centerline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "fsd/core/error.hpp"
#include "fsd/slam/mission_priors.hpp"

namespace fsd::planning {

double CenterlinePath::length() const {
  double l = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) l += (points[i] - points[i - 1]).norm();
  return l;
}

SearchNode start_node(const Pose2& start) {
  SearchNode n;
  n.prev1 = start.position();
  n.start_dir = Vec2(std::cos(start.psi), std::sin(start.psi));
  n.prev2 = n.prev1 - n.start_dir;
  return n;
}

SearchNode advance(const SearchNode& n, const Gate& g) {
  SearchNode m;
  m.prev2 = n.prev1;
  m.prev1 = g.center;
  m.current = g;
  m.gates = n.gates + 1;
  m.length = n.length + (g.center - n.prev1).norm();
  m.start_dir = n.start_dir;
  return m;
}

std::vector<Candidate> expand(const SearchNode& n, const std::vector<Gate>& gates, const std::vector<Vec2>& committed,
                              const std::vector<char>& used, const GateCostWeights& w, const SearchOptions& opt) {
  std::vector<Candidate> out;
  const double reach = w.search_radius + w.max_pair_distance;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    const double dist = (g.center - n.prev1).norm();
    if (dist > w.search_radius || dist < 0.5) continue;
    if (n.current && g.shares_cone(*n.current)) continue;
    const Vec2 before = n.prev1 - n.prev2;
    const Vec2 step = g.center - n.prev1;
    if (std::abs(std::atan2(before.x() * step.y() - before.y() * step.x(), before.dot(step))) > opt.max_turn) continue;

    const bool finish = g.is_finish() && n.gates + 1 >= opt.min_gates && n.length + dist >= opt.min_finish_length &&
                        step.dot(n.start_dir) > 0.0;
    if (!finish) {
      if (used[i]) continue;
      const bool near_committed = std::any_of(committed.begin(), committed.end(), [&](const Vec2& c) {
        return (c - g.center).norm() < opt.reuse_tolerance;
      });
      if (near_committed) continue;
    }

    // The step must not pass through an unrelated gate: that gate would be skipped.
    bool skips = false;
    for (const Gate& h : gates) {
      if (&h == &g || (h.center - n.prev1).norm() > reach) continue;
      if (h.shares_cone(g) || (n.current && h.shares_cone(*n.current))) continue;
      // A gate crossing the current one is an alternative to it, not a gate ahead.
      if (n.current && segments_cross(h.pa, h.pb, n.current->pa, n.current->pb)) continue;
      if (segments_cross(n.prev1, g.center, h.pa, h.pb)) {
        skips = true;
        break;
      }
    }
    if (skips) continue;
    out.push_back({i, gate_cost(g, n.prev2, n.prev1, w), finish});
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });
  return out;
}

CenterlineSearch::CenterlineSearch(Pose2 start, GateCostWeights w, SearchOptions opt)
    : w_(w), opt_(opt), node_(start_node(start)) {
  path_.points.push_back(start.position());
}

bool CenterlineSearch::step(const std::vector<Gate>& gates, const std::optional<Vec2>& car) {
  if (path_.complete) return false;
  std::vector<Vec2> committed;
  committed.reserve(path_.gates.size());
  for (const Gate& g : path_.gates) committed.push_back(g.center);
  std::vector<char> used(gates.size(), 0);

  struct Best {
    int depth{-1};
    double cost{std::numeric_limits<double>::infinity()};
    std::size_t first{0};
    double first_cost{0.0};
    bool first_finish{false};
  } best;

  const auto leaf = [&](int eff_depth, double c, const Candidate* first) {
    if (eff_depth > best.depth || (eff_depth == best.depth && c < best.cost)) {
      best = {eff_depth, c, first->gate, first->cost, first->finish};
    }
  };
  const std::function<void(const SearchNode&, int, double, const Candidate*)> dfs =
      [&](const SearchNode& n, int depth, double cost, const Candidate* first) {
        if (depth == opt_.depth) {
          leaf(depth, cost, first);
          return;
        }
        const std::vector<Candidate> cands = expand(n, gates, committed, used, w_, opt_);
        if (cands.empty()) {
          if (first != nullptr) leaf(depth, cost, first);
          return;
        }
        const std::size_t top = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(opt_.branch));
        for (std::size_t k = 0; k < top; ++k) {
          const Candidate& c = cands[k];
          const Candidate* f = first != nullptr ? first : &c;
          if (c.finish) {
            // A path ending at the finish counts as a full-depth path.
            leaf(opt_.depth, cost + c.cost, f);
            continue;
          }
          used[c.gate] = 1;
          dfs(advance(n, gates[c.gate]), depth + 1, cost + c.cost, f);
          used[c.gate] = 0;
        }
      };
  dfs(node_, 0, 0.0, nullptr);

  // Frontier gates are committed only once a full-depth look-ahead exists behind them.
  if (best.depth < opt_.depth) return false;
  const Gate& g = gates[best.first];
  if (car && !best.first_finish && (g.center - *car).norm() > opt_.commit_range) return false;
  path_.gates.push_back(g);
  path_.points.push_back(g.center);
  path_.cost += best.first_cost;
  node_ = advance(node_, g);
  if (best.first_finish) path_.complete = true;
  return true;
}

int CenterlineSearch::extend(const std::vector<Cone>& cones, const std::optional<Vec2>& car) {
  if (path_.complete || cones.size() < 2) return 0;
  const std::vector<Gate> gates = build_gates(cones, w_);
  int added = 0;
  while (!path_.complete && added < 10000 && step(gates, car)) ++added;
  return added;
}

CenterlinePath detect_centerline(const std::vector<Cone>& cones, const Pose2& start, const GateCostWeights& w,
                                 const SearchOptions& opt) {
  CenterlineSearch search(start, w, opt);
  search.extend(cones);
  if (search.path().gates.empty()) throw Error(ErrorCode::NoPath, "no gate within search radius of the start");
  return search.path();
}

std::optional<CenterlinePath> exhaustive_centerline(const std::vector<Cone>& cones, const Pose2& start,
                                                    const GateCostWeights& w, const SearchOptions& opt,
                                                    double initial_bound) {
  const std::vector<Gate> gates = build_gates(cones, w);
  std::vector<char> used(gates.size(), 0);
  const std::vector<Vec2> committed;
  std::vector<std::size_t> stack;
  std::vector<std::size_t> best_seq;
  double bound = initial_bound;
  bool found = false;

  const std::function<void(const SearchNode&, double)> dfs = [&](const SearchNode& n, double cost) {
    for (const Candidate& c : expand(n, gates, committed, used, w, opt)) {
      const double total = cost + c.cost;
      if (total > bound + 1e-9) break;  // candidates are sorted by cost
      stack.push_back(c.gate);
      if (c.finish) {
        if (!found || total < bound) {
          bound = total;
          best_seq = stack;
          found = true;
        }
      } else {
        used[c.gate] = 1;
        dfs(advance(n, gates[c.gate]), total);
        used[c.gate] = 0;
      }
      stack.pop_back();
    }
  };
  dfs(start_node(start), 0.0);
  if (!found) return std::nullopt;

  CenterlinePath path;
  path.points.push_back(start.position());
  SearchNode n = start_node(start);
  for (std::size_t i : best_seq) {
    path.cost += gate_cost(gates[i], n.prev2, n.prev1, w);
    path.gates.push_back(gates[i]);
    path.points.push_back(gates[i].center);
    n = advance(n, gates[i]);
  }
  path.complete = true;
  return path;
}

CenterlinePath hardcoded_centerline(Mission m, double spacing) {
  CenterlinePath path;
  path.complete = true;
  const auto straight = [&](const Vec2& a, const Vec2& b, bool include_first) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int i = include_first ? 0 : 1; i <= n; ++i) path.points.push_back(a + (b - a) * (static_cast<double>(i) / n));
  };
  if (m == Mission::Acceleration) {
    straight(Vec2(0.0, 0.0), Vec2(75.0, 0.0), true);
    return path;
  }
  if (m != Mission::Skidpad) throw Error(ErrorCode::UnknownMission, "no hardcoded centerline for this mission");

  const slam::SkidpadLayout layout = slam::load_skidpad();
  const double r = layout.centerline_radius();
  straight(Vec2(-layout.entry_length, 0.0), Vec2::Zero(), true);
  const auto circle = [&](const Vec2& c, double theta0, double dir) {
    const double total = 2.0 * kPi * r * layout.laps_per_circle;
    const int n = static_cast<int>(std::ceil(total / spacing));
    for (int i = 1; i <= n; ++i) {
      const double th = theta0 + dir * (total * i / n) / r;
      path.points.push_back(c + r * Vec2(std::cos(th), std::sin(th)));
    }
    path.points.back() = Vec2::Zero();
  };
  circle(layout.right_center(), kPi / 2.0, -1.0);
  circle(layout.left_center(), -kPi / 2.0, 1.0);
  straight(Vec2::Zero(), Vec2(layout.exit_length, 0.0), false);
  return path;
}

}  // namespace fsd::planning
