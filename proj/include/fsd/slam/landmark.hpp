#pragma once

#include <cstdint>

#include "fsd/core/cone.hpp"
#include "fsd/core/geometry.hpp"

namespace fsd::slam {

/// 2D EKF cone estimate with visibility counters.
struct ConeLandmark {
  Vec2 mean{Vec2::Zero()};
  Mat2 cov{Mat2::Identity()};
  std::uint32_t n_s{1};
  std::uint32_t n_n{0};
  ColorEvidence colors;

  [[nodiscard]] double quality() const { return static_cast<double>(n_s) / static_cast<double>(n_s + n_n); }
};

/// Gaussian density of the innovation z_d under covariance sigma.
double mahalanobis_weight(const Vec2& zd, const Mat2& sigma);

/// Identity-measurement EKF fusion of one observation.
ConeLandmark update_landmark(const ConeLandmark& lm, const Vec2& z, const Mat2& obs_cov, ConeColor color);

inline bool should_prune(const ConeLandmark& lm) { return lm.quality() < 0.5; }

}  // namespace fsd::slam
