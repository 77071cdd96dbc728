#include "fsd/core/cone.hpp"

#include <numeric>
#include <string>

#include "fsd/core/error.hpp"

namespace fsd {

std::string_view to_string(ConeColor c) {
  switch (c) {
    case ConeColor::Blue: return "blue";
    case ConeColor::Yellow: return "yellow";
    case ConeColor::OrangeSmall: return "orange_small";
    case ConeColor::OrangeLarge: return "orange_large";
    case ConeColor::Unknown: return "unknown";
  }
  return "unknown";
}

ConeColor cone_color_from_string(std::string_view s) {
  if (s == "blue") return ConeColor::Blue;
  if (s == "yellow") return ConeColor::Yellow;
  if (s == "orange_small") return ConeColor::OrangeSmall;
  if (s == "orange_large") return ConeColor::OrangeLarge;
  if (s == "unknown") return ConeColor::Unknown;
  throw Error(ErrorCode::ConfigError, "unknown cone color '" + std::string(s) + "'");
}

void ColorEvidence::merge(const ColorEvidence& other) {
  for (std::size_t i = 0; i < kConeColorCount; ++i) counts_[i] += other.counts_[i];
}

std::uint32_t ColorEvidence::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint32_t{0});
}

double ColorEvidence::probability(ConeColor c) const {
  if (c == ConeColor::Unknown) return 0.0;
  const std::uint32_t colored = total() - count(ConeColor::Unknown);
  if (colored == 0) return 0.0;
  return static_cast<double>(count(c)) / colored;
}

ConeColor ColorEvidence::most_likely() const {
  ConeColor best = ConeColor::Unknown;
  std::uint32_t best_count = 0;
  for (std::size_t i = 0; i + 1 < kConeColorCount; ++i) {
    if (counts_[i] > best_count) {
      best_count = counts_[i];
      best = static_cast<ConeColor>(i);
    }
  }
  return best;
}

}  // namespace fsd
