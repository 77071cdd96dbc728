#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "fsd/core/random.hpp"
#include "fsd/perception/observations.hpp"
#include "fsd/slam/landmark.hpp"

namespace fsd::slam {

using LandmarkMap = std::vector<ConeLandmark>;
using MapPtr = std::shared_ptr<const LandmarkMap>;

enum class SlamMode { Mapping, Localization };

struct Particle {
  Pose2 pose;
  MapPtr map{std::make_shared<const LandmarkMap>()};
  double log_weight{0.0};
  double track_width{0.0};  // acceleration prior only
};

struct PoseNoise {
  double sigma_xy{0.0};
  double sigma_psi{0.0};
};

struct SlamConfig {
  int particles{500};
  double w_no{0.4};
  double w_or{0.9};
  double w_nc{0.7};
  double sensor_range{20.0};
  double fov{125.0 * kPi / 180.0};
  double range_margin{2.0};   // expected-visibility region is shrunk by these margins
  double fov_margin{5.0 * kPi / 180.0};
  double match_radius{25.0};  // landmarks further from the car are not association candidates
  double association_gate{3.0};
  double min_separation{0.8};  // m, unmatched detections closer than this to a landmark update it
  double candidate_fraction{0.8};
  double resample_threshold{0.5};
  double exploration_fraction{0.2};
  double jitter_xy{0.1};
  double jitter_psi{0.02};
  PoseNoise motion_noise{0.01, 0.002};  // per tick at nominal speed
  double motion_noise_per_meter{0.02};
  SlamMode mode{SlamMode::Mapping};
  unsigned workers{1};
};

/// GNSS pose fix with per-axis standard deviations.
struct PoseFix {
  Pose2 pose;
  double sigma_x{0.02};
  double sigma_y{0.02};
  double sigma_psi{0.0035};
};

struct Association {
  enum class Kind { Matched, New } kind{Kind::New};
  std::size_t index{0};
  double w_m{0.0};
};

/// Observation in the world frame as seen from a given particle pose.
struct WorldObservation {
  Vec2 z;
  Mat2 cov;
  ConeColor color{ConeColor::Unknown};
};

WorldObservation to_world(const Pose2& pose, const perception::ConeObservation& obs);

void predict_particles(std::vector<Particle>& particles, const Twist2& twist, double dt, const PoseNoise& noise,
                       RngStream& rng);

Association associate(const Particle& p, const WorldObservation& obs, const SlamConfig& cfg, LightRng& rng);

/// Log of the multiplicative weight update.
struct WeightTerms {
  int i{0};  // expected but unobserved
  int j{0};  // observed outside the expected region
  int k{0};  // new cones
  std::vector<double> w_m;
  std::vector<double> w_p;
};
double log_weight_update(const WeightTerms& t, const SlamConfig& cfg);

/// Product of three 1D Gaussian densities of the pose difference.
std::vector<double> pose_weights(const Pose2& particle, const PoseFix& fix);

/// Whether a world point lies in the region where the particle should see it.
bool expected_visible(const Pose2& pose, const Vec2& point, const SlamConfig& cfg);
bool within_sensor(const Pose2& pose, const Vec2& point, const SlamConfig& cfg);

/// Normalizes log weights in place and returns linear weights summing to 1.
std::vector<double> normalized_weights(const std::vector<Particle>& particles);

double effective_count(const std::vector<double>& weights);

/// Low-variance resampling: positions offset + m/N with offset in [0, 1/N).
std::vector<std::size_t> systematic_indices(const std::vector<double>& weights, double offset);

void resample(std::vector<Particle>& particles, const SlamConfig& cfg, RngStream& rng);

/// Removes landmarks with quality below one half.
void prune(Particle& p);

struct Estimate {
  Pose2 pose;
  LandmarkMap map;
};
Estimate estimate(const std::vector<Particle>& particles);
Pose2 weighted_pose(const std::vector<Particle>& particles);

struct TickStats {
  double n_eff{0.0};
  bool resampled{false};
  std::size_t map_size{0};
};

class FastSlam {
 public:
  FastSlam(SlamConfig cfg, std::vector<Particle> particles, RngStream rng);

  void predict(const Twist2& twist, double dt);
  TickStats update(const std::vector<perception::ConeObservation>& obs, const std::optional<PoseFix>& gnss);

  /// Copies the best particle's map to all particles and stops map updates.
  void freeze_map();

  [[nodiscard]] bool frozen() const { return cfg_.mode == SlamMode::Localization; }
  [[nodiscard]] const SlamConfig& config() const { return cfg_; }
  [[nodiscard]] const std::vector<Particle>& particles() const { return particles_; }
  std::vector<Particle>& particles() { return particles_; }
  [[nodiscard]] Pose2 pose() const;
  [[nodiscard]] const LandmarkMap& best_map() const;
  [[nodiscard]] double track_width() const;
  [[nodiscard]] double last_n_eff() const { return last_n_eff_; }

 private:
  SlamConfig cfg_;
  std::vector<Particle> particles_;
  RngStream rng_;
  std::uint64_t tick_{0};
  double last_n_eff_{0.0};
};

/// Lap completion: back within `radius` of the start after `min_distance` travelled.
class LapDetector {
 public:
  LapDetector(Vec2 start, double radius = 3.0, double min_distance = 30.0)
      : start_(std::move(start)), last_(start_), radius_(radius), min_distance_(min_distance) {}

  /// Returns true on the tick a lap completes.
  bool update(const Vec2& position);
  [[nodiscard]] int laps() const { return laps_; }

 private:
  Vec2 start_;
  Vec2 last_;
  double radius_;
  double min_distance_;
  double travelled_{0.0};
  int laps_{0};
};

}  // namespace fsd::slam
