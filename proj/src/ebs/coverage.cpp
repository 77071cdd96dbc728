#include "fsd/ebs/coverage.hpp"

#include <algorithm>
#include <json.hpp>
#include <map>
#include <set>

#include "fsd/core/error.hpp"
#include "fsd/core/parallel.hpp"
#include "fsd/core/random.hpp"

namespace fsd::ebs {

ScenarioResult evaluate_scenario(const Network& pressurized, const CheckSequence& seq,
                                 const std::vector<FailureSpec>& failures, double unsafe_pressure) {
  const Network net = inject(pressurized, failures);
  const CheckupVerdict a = checkup(net, CheckMode::Autonomous, seq);
  const CheckupVerdict m = checkup(net, CheckMode::Manual, seq);
  ScenarioResult r;
  r.failures = failures;
  r.autonomous = a.outcome;
  r.manual = m.outcome;
  r.autonomous_check = a.failed_check;
  r.manual_check = m.failed_check;
  r.detected = a.outcome == CheckupOutcome::Fault || m.outcome == CheckupOutcome::Fault;
  r.manual_unsafe = m.outcome != CheckupOutcome::Fault && m.tank_pressure > unsafe_pressure;
  return r;
}

double combination_count(const std::vector<FailureSpec>& catalog, int k) {
  std::map<std::string, double> per_component;
  for (const FailureSpec& f : catalog) per_component[f.component] += 1.0;
  // Elementary symmetric polynomial of the per-component mode counts.
  std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
  e[0] = 1.0;
  for (const auto& [id, n] : per_component) {
    for (int j = k; j >= 1; --j) e[static_cast<std::size_t>(j)] += n * e[static_cast<std::size_t>(j - 1)];
  }
  return e[static_cast<std::size_t>(k)];
}

std::vector<std::vector<FailureSpec>> failure_combinations(const std::vector<FailureSpec>& catalog, int k,
                                                           std::size_t budget, std::uint64_t seed, bool* sampled) {
  std::vector<std::vector<FailureSpec>> out;
  const double total = combination_count(catalog, k);
  const bool sample = total > static_cast<double>(budget);
  if (sampled != nullptr) *sampled = sample;

  if (!sample) {
    std::vector<std::size_t> idx;
    const auto rec = [&](auto&& self, std::size_t start) -> void {
      if (static_cast<int>(idx.size()) == k) {
        std::vector<FailureSpec> combo;
        for (std::size_t i : idx) combo.push_back(catalog[i]);
        out.push_back(std::move(combo));
        return;
      }
      for (std::size_t i = start; i < catalog.size(); ++i) {
        const bool clash = std::any_of(idx.begin(), idx.end(),
                                       [&](std::size_t j) { return catalog[j].component == catalog[i].component; });
        if (clash) continue;
        idx.push_back(i);
        self(self, i + 1);
        idx.pop_back();
      }
    };
    rec(rec, 0);
    return out;
  }

  // Rejection sampling over index sets is uniform over valid combinations.
  RngStream rng(seed, static_cast<std::uint64_t>(k));
  std::set<std::vector<std::size_t>> seen;
  while (out.size() < budget) {
    std::vector<std::size_t> idx;
    while (static_cast<int>(idx.size()) < k) {
      const std::size_t i = rng.index(catalog.size());
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end());
    bool clash = false;
    for (std::size_t a = 0; a < idx.size() && !clash; ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) clash = clash || catalog[idx[a]].component == catalog[idx[b]].component;
    }
    if (clash || !seen.insert(idx).second) continue;
    std::vector<FailureSpec> combo;
    for (std::size_t i : idx) combo.push_back(catalog[i]);
    out.push_back(std::move(combo));
  }
  return out;
}

CoverageReport coverage_report(const Network& pressurized, const CheckSequence& seq, const CoverageOptions& opt) {
  if (opt.max_simultaneous < 1 || opt.max_simultaneous > 3) {
    throw std::invalid_argument("max_simultaneous must lie in 1..3");
  }
  const std::vector<FailureSpec> catalog = failure_catalog(pressurized);
  const unsigned workers = opt.workers == 0 ? default_workers() : opt.workers;
  CoverageReport report;
  report.sensors = pressurized.sensor_ids();
  for (int k = 1; k <= opt.max_simultaneous; ++k) {
    CoverageLevel level;
    level.k = k;
    level.combinations = combination_count(catalog, k);
    const auto combos = failure_combinations(catalog, k, opt.budget, mix_seed(opt.seed, 0xeb5), &level.sampled);
    level.scenarios.resize(combos.size());
    parallel_for(combos.size(), workers, [&](std::size_t i) {
      level.scenarios[i] = evaluate_scenario(pressurized, seq, combos[i], opt.unsafe_pressure);
    });
    level.evaluated = combos.size();
    for (const ScenarioResult& r : level.scenarios) {
      level.detected += r.detected ? 1 : 0;
      level.manual_unsafe += r.manual_unsafe ? 1 : 0;
    }
    report.levels.push_back(std::move(level));
  }
  return report;
}

std::string report_json(const CoverageReport& report) {
  using nlohmann::json;
  json j;
  j["sensors"] = report.sensors;
  j["levels"] = json::array();
  for (const CoverageLevel& l : report.levels) {
    json lj;
    lj["k"] = l.k;
    lj["combinations"] = l.combinations;
    lj["sampled"] = l.sampled;
    lj["evaluated"] = l.evaluated;
    lj["detected"] = l.detected;
    lj["fraction"] = l.fraction();
    lj["manual_unsafe_undetected"] = l.manual_unsafe;
    lj["scenarios"] = json::array();
    for (const ScenarioResult& r : l.scenarios) {
      json sj;
      sj["failures"] = json::array();
      for (const FailureSpec& f : r.failures) sj["failures"].push_back(describe(f));
      sj["autonomous"] = to_string(r.autonomous);
      sj["manual"] = to_string(r.manual);
      if (!r.autonomous_check.empty()) sj["autonomous_check"] = r.autonomous_check;
      if (!r.manual_check.empty()) sj["manual_check"] = r.manual_check;
      sj["detected"] = r.detected;
      sj["manual_unsafe"] = r.manual_unsafe;
      lj["scenarios"].push_back(std::move(sj));
    }
    j["levels"].push_back(std::move(lj));
  }
  return j.dump(2);
}

}  // namespace fsd::ebs
