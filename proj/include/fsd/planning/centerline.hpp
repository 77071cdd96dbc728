#pragma once

#include <optional>
#include <vector>

#include "fsd/core/mission.hpp"
#include "fsd/planning/gates.hpp"

namespace fsd::planning {

struct CenterlinePath {
  std::vector<Gate> gates;
  std::vector<Vec2> points;  // gate centres, or dense samples for hardcoded paths
  double cost{0.0};
  bool complete{false};

  [[nodiscard]] double length() const;
};

struct SearchOptions {
  int depth{3};
  int branch{3};
  double min_finish_length{20.0};
  int min_gates{3};
  double reuse_tolerance{1.0};  // candidate centres this close to a committed centre are skipped
  double max_turn{1.0471975511965976};  // rad, larger heading changes between gates are inadmissible
  double commit_range{14.0};  // m from the car; the map beyond is too sparse to commit to
};

/// Search state after committing a prefix of gates.
struct SearchNode {
  Vec2 prev2;
  Vec2 prev1;
  std::optional<Gate> current;
  int gates{0};
  double length{0.0};
  Vec2 start_dir{1.0, 0.0};  // the finish gate must be crossed in this direction
};

SearchNode start_node(const Pose2& start);
SearchNode advance(const SearchNode& n, const Gate& g);

/// Admissible next gates from n with their costs, cheapest first.
struct Candidate {
  std::size_t gate{0};
  double cost{0.0};
  bool finish{false};
};
std::vector<Candidate> expand(const SearchNode& n, const std::vector<Gate>& gates, const std::vector<Vec2>& committed,
                              const std::vector<char>& used, const GateCostWeights& w, const SearchOptions& opt);

/// Incremental depth/branch limited search. Commits are append-only.
class CenterlineSearch {
 public:
  CenterlineSearch(Pose2 start, GateCostWeights w = {}, SearchOptions opt = {});

  /// Extends the committed path as far as the current cone map allows.
  /// With `car` given, only gates within `commit_range` of it are committed.
  /// Returns the number of newly committed gates.
  int extend(const std::vector<Cone>& cones, const std::optional<Vec2>& car = std::nullopt);

  /// Commits at most one gate; returns false when nothing could be committed.
  bool step(const std::vector<Gate>& gates, const std::optional<Vec2>& car = std::nullopt);

  [[nodiscard]] const CenterlinePath& path() const { return path_; }
  [[nodiscard]] bool complete() const { return path_.complete; }

 private:
  GateCostWeights w_;
  SearchOptions opt_;
  SearchNode node_;
  CenterlinePath path_;
};

/// Runs the incremental search to completion on a static map. Throws NoPath if
/// not even the first gate can be found.
CenterlinePath detect_centerline(const std::vector<Cone>& cones, const Pose2& start, const GateCostWeights& w = {},
                                 const SearchOptions& opt = {});

/// Minimum total-cost complete path by exhaustive branch and bound.
std::optional<CenterlinePath> exhaustive_centerline(const std::vector<Cone>& cones, const Pose2& start,
                                                    const GateCostWeights& w = {}, const SearchOptions& opt = {},
                                                    double initial_bound = std::numeric_limits<double>::infinity());

/// Fixed-layout centerlines sampled densely (spacing in metres).
CenterlinePath hardcoded_centerline(Mission m, double spacing = 0.05);

}  // namespace fsd::planning
