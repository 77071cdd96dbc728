#include "fsd/slam/landmark.hpp"

#include <Eigen/LU>

namespace fsd::slam {

double mahalanobis_weight(const Vec2& zd, const Mat2& sigma) {
  const double det = sigma.determinant();
  if (!(det > 0.0)) return 0.0;
  const double m = zd.dot(sigma.inverse() * zd);
  return std::exp(-0.5 * m) / (2.0 * kPi * std::sqrt(det));
}

ConeLandmark update_landmark(const ConeLandmark& lm, const Vec2& z, const Mat2& obs_cov, ConeColor color) {
  ConeLandmark out = lm;
  const Mat2 s = lm.cov + obs_cov;
  const Mat2 k = lm.cov * s.inverse();
  out.mean = lm.mean + k * (z - lm.mean);
  const Mat2 i_k = Mat2::Identity() - k;
  // Joseph form keeps the 2x2 covariance symmetric positive definite.
  out.cov = i_k * lm.cov * i_k.transpose() + k * obs_cov * k.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  ++out.n_s;
  out.colors.add(color);
  return out;
}

}  // namespace fsd::slam
