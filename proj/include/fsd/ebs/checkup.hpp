#pragma once

#include <limits>
#include <string>
#include <vector>

#include "fsd/ebs/circuit.hpp"

namespace fsd::ebs {

enum class CheckMode { Manual, Autonomous };

/// A sensor bound. With `since` set the bound applies to the change of the
/// reading relative to the named mark, otherwise to the reading itself.
struct Assertion {
  std::string sensor;  // base id, applied in every circuit
  double min{-std::numeric_limits<double>::infinity()};
  double max{std::numeric_limits<double>::infinity()};
  std::string since;
};

struct ValveCommand {
  std::string valve;  // base id
  bool on{false};     // energized / vent position
};

struct CheckStep {
  std::string name;
  std::vector<ValveCommand> commands;
  double wait{0.0};
  std::vector<Assertion> assertions;
  std::string mark;  // records all readings at the end of the step
};

struct CheckSequence {
  double dt{0.001};
  std::vector<CheckStep> autonomous;
  std::vector<CheckStep> manual;

  [[nodiscard]] const std::vector<CheckStep>& steps(CheckMode m) const {
    return m == CheckMode::Manual ? manual : autonomous;
  }
};

CheckSequence parse_sequence(const std::string& json_text);
CheckSequence load_sequence(const std::string& path);

enum class CheckupOutcome { ReadyAutonomous, ReadyManual, Fault };

std::string to_string(CheckupOutcome o);

struct TraceRow {
  std::string step;
  double t{0.0};
  std::vector<double> readings;  // ordered as CheckupVerdict::sensors
};

struct CheckupVerdict {
  CheckupOutcome outcome{CheckupOutcome::Fault};
  int failed_step{-1};
  std::string failed_check;
  std::vector<std::string> sensors;
  std::vector<TraceRow> trace;
  /// Truth at the end of the run: highest pressure over the tank nodes.
  double tank_pressure{0.0};
};

/// Runs the scripted sequence against a copy of `net`; stops at the first
/// violated assertion. Assertions on sensors absent from the model are skipped.
CheckupVerdict checkup(Network net, CheckMode mode, const CheckSequence& seq);

}  // namespace fsd::ebs
