#include "fsd/core/geometry.hpp"

#include "fsd/core/error.hpp"

namespace fsd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::TerminalSensorFault: return "TerminalSensorFault";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::EmptyDepth: return "EmptyDepth";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::UnknownMission: return "UnknownMission";
    case ErrorCode::NotInMappingMode: return "NotInMappingMode";
    case ErrorCode::TooFewCones: return "TooFewCones";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::ProgressOutOfDomain: return "ProgressOutOfDomain";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::IncompatibleMode: return "IncompatibleMode";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double angle_diff(double a, double b) { return wrap_angle(a - b); }

Mat2 rotation(double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Vec2 vehicle_to_world(const Pose2& pose, const Vec2& point) {
  return rotation(pose.psi) * point + pose.position();
}

Vec2 world_to_vehicle(const Pose2& pose, const Vec2& point) {
  return rotation(pose.psi).transpose() * (point - pose.position());
}

Mat2 rotate_covariance(double psi, const Mat2& cov) {
  const Mat2 r = rotation(psi);
  return r * cov * r.transpose();
}

}  // namespace fsd
