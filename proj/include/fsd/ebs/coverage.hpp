#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsd/ebs/checkup.hpp"
#include "fsd/ebs/circuit.hpp"

namespace fsd::ebs {

struct CoverageOptions {
  int max_simultaneous{1};
  /// Combination counts above this are replaced by a seeded sample of this size.
  std::size_t budget{1500};
  std::uint64_t seed{1};
  unsigned workers{0};  // 0: hardware concurrency
  /// A tank above this pressure after a passing manual check-up is unsafe.
  double unsafe_pressure{0.5};
};

struct ScenarioResult {
  std::vector<FailureSpec> failures;
  CheckupOutcome autonomous{CheckupOutcome::Fault};
  CheckupOutcome manual{CheckupOutcome::Fault};
  std::string autonomous_check;
  std::string manual_check;
  bool detected{false};       // either check-up reports a fault
  bool manual_unsafe{false};  // tank left pressurized and the manual check-up passed
};

struct CoverageLevel {
  int k{1};
  double combinations{0.0};  // size of the full combination space
  bool sampled{false};
  std::size_t evaluated{0};
  std::size_t detected{0};
  std::size_t manual_unsafe{0};
  std::vector<ScenarioResult> scenarios;

  [[nodiscard]] double fraction() const { return evaluated == 0 ? 1.0 : static_cast<double>(detected) / evaluated; }
};

struct CoverageReport {
  std::vector<CoverageLevel> levels;
  std::vector<std::string> sensors;
};

/// Runs both check-ups for one failure set, starting from `pressurized`.
ScenarioResult evaluate_scenario(const Network& pressurized, const CheckSequence& seq,
                                 const std::vector<FailureSpec>& failures, double unsafe_pressure = 0.5);

/// Number of k-failure combinations with at most one failure per component.
double combination_count(const std::vector<FailureSpec>& catalog, int k);

/// All k-combinations when they fit the budget, otherwise a seeded uniform
/// sample of `budget` distinct combinations. Deterministic for a given seed.
std::vector<std::vector<FailureSpec>> failure_combinations(const std::vector<FailureSpec>& catalog, int k,
                                                           std::size_t budget, std::uint64_t seed,
                                                           bool* sampled = nullptr);

/// Detection matrix for k = 1..max_simultaneous. Scenario runs are parallel;
/// results do not depend on the worker count.
CoverageReport coverage_report(const Network& pressurized, const CheckSequence& seq, const CoverageOptions& opt);

std::string report_json(const CoverageReport& report);

}  // namespace fsd::ebs
