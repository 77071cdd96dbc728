#pragma once

#include <cstddef>
#include <vector>

namespace fsd::perception {

inline constexpr double kDepthGap = 0.5;  // m

/// Mean of the single-linkage cluster containing samples[midpoint].
double cluster_depth(const std::vector<double>& samples, std::size_t midpoint, double gap = kDepthGap);

}  // namespace fsd::perception
