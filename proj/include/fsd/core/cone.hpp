#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "fsd/core/geometry.hpp"

namespace fsd {

enum class ConeColor : std::uint8_t { Blue = 0, Yellow, OrangeSmall, OrangeLarge, Unknown };

inline constexpr std::size_t kConeColorCount = 5;

std::string_view to_string(ConeColor c);
ConeColor cone_color_from_string(std::string_view s);

/// Accumulated per-color detection counts. Counts only ever grow.
class ColorEvidence {
 public:
  void add(ConeColor c, std::uint32_t n = 1) { counts_[static_cast<std::size_t>(c)] += n; }
  void merge(const ColorEvidence& other);

  [[nodiscard]] std::uint32_t count(ConeColor c) const { return counts_[static_cast<std::size_t>(c)]; }
  [[nodiscard]] std::uint32_t total() const;

  /// Fraction of colored (non-Unknown) detections voting for `c`; 0 if none.
  [[nodiscard]] double probability(ConeColor c) const;

  /// Most frequent non-Unknown color, Unknown when no colored detection exists.
  [[nodiscard]] ConeColor most_likely() const;

  [[nodiscard]] const std::array<std::uint32_t, kConeColorCount>& counts() const { return counts_; }

 private:
  std::array<std::uint32_t, kConeColorCount> counts_{};
};

/// A cone with known (ground-truth or mapped) position.
struct Cone {
  Vec2 position{Vec2::Zero()};
  ConeColor color{ConeColor::Unknown};
};

}  // namespace fsd
