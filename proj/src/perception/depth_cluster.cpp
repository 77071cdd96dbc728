#include "fsd/perception/depth_cluster.hpp"

#include <algorithm>
#include <numeric>

#include "fsd/core/error.hpp"

namespace fsd::perception {

double cluster_depth(const std::vector<double>& samples, std::size_t midpoint, double gap) {
  if (samples.empty()) throw Error(ErrorCode::EmptyDepth, "no depth samples");
  if (midpoint >= samples.size()) throw std::invalid_argument("cluster_depth: midpoint index out of range");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });

  // Clusters are maximal runs of the sorted samples with consecutive gaps <= gap.
  std::size_t begin = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool last = i + 1 == order.size();
    if (last || samples[order[i + 1]] - samples[order[i]] > gap) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(begin);
      const auto end = order.begin() + static_cast<std::ptrdiff_t>(i + 1);
      if (std::find(first, end, midpoint) != end) {
        double sum = 0.0;
        for (auto it = first; it != end; ++it) sum += samples[*it];
        return sum / static_cast<double>(i + 1 - begin);
      }
      begin = i + 1;
    }
  }
  return samples[midpoint];
}

}  // namespace fsd::perception
