#pragma once

#include <string_view>

namespace fsd {

enum class Mission { Acceleration, Skidpad, Autocross, Trackdrive };

std::string_view to_string(Mission m);

/// Throws Error(UnknownMission) for unrecognized names.
Mission mission_from_string(std::string_view name);

inline bool has_fixed_layout(Mission m) { return m == Mission::Acceleration || m == Mission::Skidpad; }

}  // namespace fsd
