#include "fsd/core/mission.hpp"

#include <string>

#include "fsd/core/error.hpp"

namespace fsd {

std::string_view to_string(Mission m) {
  switch (m) {
    case Mission::Acceleration: return "acceleration";
    case Mission::Skidpad: return "skidpad";
    case Mission::Autocross: return "autocross";
    case Mission::Trackdrive: return "trackdrive";
  }
  return "unknown";
}

Mission mission_from_string(std::string_view name) {
  if (name == "acceleration") return Mission::Acceleration;
  if (name == "skidpad") return Mission::Skidpad;
  if (name == "autocross") return Mission::Autocross;
  if (name == "trackdrive") return Mission::Trackdrive;
  throw Error(ErrorCode::UnknownMission, "'" + std::string(name) + "'");
}

}  // namespace fsd
