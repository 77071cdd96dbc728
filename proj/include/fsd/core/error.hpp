#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fsd {

enum class ErrorCode {
  NonFiniteState,
  SingularInnovation,
  TerminalSensorFault,
  DegenerateInput,
  NoConsensus,
  EmptyDepth,
  NoConvergence,
  BehindCamera,
  UnknownMission,
  NotInMappingMode,
  TooFewCones,
  NoPath,
  ProgressOutOfDomain,
  Infeasible,
  UnstableStep,
  IncompatibleMode,
  GenerationFailed,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Domain failure carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fsd
