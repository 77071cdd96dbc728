#include "fsd/slam/fastslam.hpp"

#include <algorithm>
#include <numeric>

#include "fsd/core/error.hpp"
#include "fsd/core/parallel.hpp"

namespace fsd::slam {

namespace {

Association associate_in(const Pose2& pose, const LandmarkMap& map, const WorldObservation& obs,
                         const SlamConfig& cfg, LightRng& rng) {
  thread_local std::vector<std::pair<std::size_t, double>> cands;
  cands.clear();
  const Vec2 car = pose.position();
  const double r2 = cfg.match_radius * cfg.match_radius;
  const double g2 = cfg.association_gate * cfg.association_gate;
  double best = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const ConeLandmark& lm = map[i];
    if ((lm.mean - car).squaredNorm() > r2) continue;
    const Vec2 zd = obs.z - lm.mean;
    if (zd.squaredNorm() > g2) continue;
    const double w = mahalanobis_weight(zd, obs.cov + lm.cov);
    cands.emplace_back(i, w);
    best = std::max(best, w);
  }
  Association a;
  if (cands.empty() || best < cfg.w_nc) return a;

  // Random choice among the most likely associations.
  const double cutoff = cfg.candidate_fraction * best;
  std::size_t n_top = 0;
  for (const auto& c : cands) n_top += c.second >= cutoff ? 1 : 0;
  std::size_t pick = n_top > 1 ? static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_top)) : 0;
  pick = std::min(pick, n_top - 1);
  for (const auto& c : cands) {
    if (c.second < cutoff) continue;
    if (pick == 0) {
      a.kind = Association::Kind::Matched;
      a.index = c.first;
      a.w_m = c.second;
      break;
    }
    --pick;
  }
  return a;
}

void process_particle(Particle& p, const std::vector<perception::ConeObservation>& obs,
                      const std::optional<PoseFix>& gnss, const SlamConfig& cfg, LightRng rng) {
  const bool mapping = cfg.mode == SlamMode::Mapping;
  const MapPtr base_ptr = p.map;
  const LandmarkMap& base = *base_ptr;
  std::shared_ptr<LandmarkMap> edited;
  std::vector<char> matched(base.size(), 0);
  WeightTerms terms;

  for (const perception::ConeObservation& o : obs) {
    const WorldObservation wo = to_world(p.pose, o);
    const LandmarkMap& current = edited ? *edited : base;
    const Association a = associate_in(p.pose, current, wo, cfg, rng);
    if (a.kind == Association::Kind::Matched) {
      terms.w_m.push_back(a.w_m);
      if (a.index < matched.size()) matched[a.index] = 1;
      if (!within_sensor(p.pose, current[a.index].mean, cfg)) ++terms.j;
      if (mapping) {
        if (!edited) edited = std::make_shared<LandmarkMap>(base);
        (*edited)[a.index] = update_landmark((*edited)[a.index], wo.z, wo.cov, wo.color);
      }
    } else {
      // Far-range detections only confirm existing cones; spawning from them
      // leaves duplicates that never fall inside the region where misses are counted.
      if (!expected_visible(p.pose, wo.z, cfg)) continue;
      ++terms.k;
      if (mapping) {
        if (!edited) edited = std::make_shared<LandmarkMap>(base);
        // Two cones never stand this close: fold the detection into the neighbour.
        std::size_t nearest = edited->size();
        double nearest_d2 = cfg.min_separation * cfg.min_separation;
        for (std::size_t i = 0; i < edited->size(); ++i) {
          const double d2 = ((*edited)[i].mean - wo.z).squaredNorm();
          if (d2 < nearest_d2) {
            nearest_d2 = d2;
            nearest = i;
          }
        }
        if (nearest < edited->size()) {
          (*edited)[nearest] = update_landmark((*edited)[nearest], wo.z, wo.cov, wo.color);
          if (nearest < matched.size()) matched[nearest] = 1;
          continue;
        }
        ConeLandmark lm;
        lm.mean = wo.z;
        lm.cov = wo.cov;
        lm.colors.add(wo.color);
        edited->push_back(lm);
      }
    }
  }

  for (std::size_t i = 0; i < base.size(); ++i) {
    if (matched[i] || !expected_visible(p.pose, base[i].mean, cfg)) continue;
    ++terms.i;
    if (mapping) {
      if (!edited) edited = std::make_shared<LandmarkMap>(base);
      ++(*edited)[i].n_n;
    }
  }

  if (gnss) terms.w_p = pose_weights(p.pose, *gnss);
  p.log_weight += log_weight_update(terms, cfg);
  if (edited) {
    p.map = std::move(edited);
    prune(p);
  }
}

}  // namespace

WorldObservation to_world(const Pose2& pose, const perception::ConeObservation& obs) {
  return {vehicle_to_world(pose, obs.position), rotate_covariance(pose.psi, obs.cov), obs.color};
}

void predict_particles(std::vector<Particle>& particles, const Twist2& twist, double dt, const PoseNoise& noise,
                       RngStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict_particles: dt must be positive");
  const std::uint64_t key = rng.next_u64();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    Pose2& pose = particles[i].pose;
    const Vec2 d = rotation(pose.psi) * Vec2(twist.vx, twist.vy) * dt;
    double x = pose.x + d.x();
    double y = pose.y + d.y();
    double psi = pose.psi + twist.r * dt;
    if (noise.sigma_xy > 0.0 || noise.sigma_psi > 0.0) {
      LightRng r(mix_seed(key, i));
      x += r.normal(0.0, noise.sigma_xy);
      y += r.normal(0.0, noise.sigma_xy);
      psi += r.normal(0.0, noise.sigma_psi);
    }
    pose = Pose2(x, y, psi);
  }
}

Association associate(const Particle& p, const WorldObservation& obs, const SlamConfig& cfg, LightRng& rng) {
  return associate_in(p.pose, *p.map, obs, cfg, rng);
}

double log_weight_update(const WeightTerms& t, const SlamConfig& cfg) {
  double lw = t.i * std::log(cfg.w_no) + t.j * std::log(cfg.w_or) + t.k * std::log(cfg.w_nc);
  for (double w : t.w_m) lw += std::log(std::max(w, 1e-300));
  for (double w : t.w_p) lw += std::log(std::max(w, 1e-300));
  return lw;
}

std::vector<double> pose_weights(const Pose2& particle, const PoseFix& fix) {
  const auto gauss = [](double d, double sigma) {
    return std::exp(-0.5 * d * d / (sigma * sigma)) / (std::sqrt(2.0 * kPi) * sigma);
  };
  return {gauss(particle.x - fix.pose.x, fix.sigma_x), gauss(particle.y - fix.pose.y, fix.sigma_y),
          gauss(angle_diff(particle.psi, fix.pose.psi), fix.sigma_psi)};
}

bool within_sensor(const Pose2& pose, const Vec2& point, const SlamConfig& cfg) {
  const Vec2 local = world_to_vehicle(pose, point);
  const double range = local.norm();
  return range <= cfg.sensor_range && std::abs(std::atan2(local.y(), local.x())) <= 0.5 * cfg.fov;
}

bool expected_visible(const Pose2& pose, const Vec2& point, const SlamConfig& cfg) {
  const Vec2 local = world_to_vehicle(pose, point);
  const double range = local.norm();
  return range > 1.0 && range <= cfg.sensor_range - cfg.range_margin &&
         std::abs(std::atan2(local.y(), local.x())) <= 0.5 * cfg.fov - cfg.fov_margin;
}

std::vector<double> normalized_weights(const std::vector<Particle>& particles) {
  std::vector<double> w(particles.size(), 0.0);
  if (particles.empty()) return w;
  double max_lw = -std::numeric_limits<double>::infinity();
  for (const Particle& p : particles) max_lw = std::max(max_lw, p.log_weight);
  if (!std::isfinite(max_lw)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    w[i] = std::exp(particles[i].log_weight - max_lw);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

double effective_count(const std::vector<double>& weights) {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return s > 0.0 ? 1.0 / s : 0.0;
}

std::vector<std::size_t> systematic_indices(const std::vector<double>& weights, double offset) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx;
  idx.reserve(n);
  if (n == 0) return idx;
  const double step = 1.0 / static_cast<double>(n);
  double cumulative = weights[0];
  std::size_t i = 0;
  for (std::size_t m = 0; m < n; ++m) {
    const double u = offset + static_cast<double>(m) * step;
    while (u >= cumulative && i + 1 < n) cumulative += weights[++i];
    // Floating-point slack at the end of the cumulative sum must not land on a zero-weight tail.
    while (weights[i] <= 0.0 && i > 0) --i;
    idx.push_back(i);
  }
  return idx;
}

void resample(std::vector<Particle>& particles, const SlamConfig& cfg, RngStream& rng) {
  const std::size_t n = particles.size();
  if (n == 0) return;
  const std::vector<double> w = normalized_weights(particles);
  const std::vector<std::size_t> idx = systematic_indices(w, rng.uniform() / static_cast<double>(n));
  std::vector<Particle> next;
  next.reserve(n);
  for (std::size_t i : idx) next.push_back(particles[i]);

  // Exploration: a random subset gets its pose scattered.
  const auto n_explore = static_cast<std::size_t>(std::lround(cfg.exploration_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < n_explore && k < n; ++k) {
    const std::size_t j = k + rng.index(n - k);
    std::swap(order[k], order[j]);
    Pose2& pose = next[order[k]].pose;
    pose = Pose2(pose.x + rng.normal(0.0, cfg.jitter_xy), pose.y + rng.normal(0.0, cfg.jitter_xy),
                 pose.psi + rng.normal(0.0, cfg.jitter_psi));
  }
  for (Particle& p : next) p.log_weight = 0.0;
  particles = std::move(next);
}

void prune(Particle& p) {
  if (std::none_of(p.map->begin(), p.map->end(), should_prune)) return;
  auto kept = std::make_shared<LandmarkMap>();
  kept->reserve(p.map->size());
  for (const ConeLandmark& lm : *p.map) {
    if (!should_prune(lm)) kept->push_back(lm);
  }
  p.map = std::move(kept);
}

Pose2 weighted_pose(const std::vector<Particle>& particles) {
  const std::vector<double> w = normalized_weights(particles);
  double x = 0.0;
  double y = 0.0;
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    x += w[i] * particles[i].pose.x;
    y += w[i] * particles[i].pose.y;
    s += w[i] * std::sin(particles[i].pose.psi);
    c += w[i] * std::cos(particles[i].pose.psi);
  }
  return {x, y, std::atan2(s, c)};
}

Estimate estimate(const std::vector<Particle>& particles) {
  Estimate e;
  if (particles.empty()) return e;
  e.pose = weighted_pose(particles);
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles.size(); ++i) {
    if (particles[i].log_weight > particles[best].log_weight) best = i;
  }
  e.map = *particles[best].map;
  return e;
}

FastSlam::FastSlam(SlamConfig cfg, std::vector<Particle> particles, RngStream rng)
    : cfg_(cfg), particles_(std::move(particles)), rng_(std::move(rng)) {
  if (particles_.empty()) throw std::invalid_argument("FastSlam: no particles");
}

void FastSlam::predict(const Twist2& twist, double dt) {
  const double dist = std::hypot(twist.vx, twist.vy) * dt;
  const PoseNoise noise{cfg_.motion_noise.sigma_xy + cfg_.motion_noise_per_meter * dist,
                        cfg_.motion_noise.sigma_psi + 0.5 * cfg_.motion_noise_per_meter * std::abs(twist.r) * dt};
  predict_particles(particles_, twist, dt, noise, rng_);
}

TickStats FastSlam::update(const std::vector<perception::ConeObservation>& obs, const std::optional<PoseFix>& gnss) {
  const std::uint64_t key = mix_seed(rng_.next_u64(), tick_++);
  parallel_for(particles_.size(), cfg_.workers, [&](std::size_t i) {
    process_particle(particles_[i], obs, gnss, cfg_, LightRng(mix_seed(key, i)));
  });

  TickStats stats;
  const std::vector<double> w = normalized_weights(particles_);
  stats.n_eff = effective_count(w);
  last_n_eff_ = stats.n_eff;
  if (stats.n_eff < cfg_.resample_threshold * static_cast<double>(particles_.size())) {
    resample(particles_, cfg_, rng_);
    stats.resampled = true;
  } else {
    // Keep log weights bounded.
    double max_lw = -std::numeric_limits<double>::infinity();
    for (const Particle& p : particles_) max_lw = std::max(max_lw, p.log_weight);
    for (Particle& p : particles_) p.log_weight -= max_lw;
  }
  stats.map_size = best_map().size();
  return stats;
}

void FastSlam::freeze_map() {
  if (cfg_.mode != SlamMode::Mapping) throw Error(ErrorCode::NotInMappingMode, "map already frozen");
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles_.size(); ++i) {
    if (particles_[i].log_weight > particles_[best].log_weight) best = i;
  }
  const MapPtr map = particles_[best].map;
  for (Particle& p : particles_) p.map = map;
  cfg_.mode = SlamMode::Localization;
}

Pose2 FastSlam::pose() const { return weighted_pose(particles_); }

const LandmarkMap& FastSlam::best_map() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles_.size(); ++i) {
    if (particles_[i].log_weight > particles_[best].log_weight) best = i;
  }
  return *particles_[best].map;
}

double FastSlam::track_width() const {
  const std::vector<double> w = normalized_weights(particles_);
  double width = 0.0;
  for (std::size_t i = 0; i < particles_.size(); ++i) width += w[i] * particles_[i].track_width;
  return width;
}

bool LapDetector::update(const Vec2& position) {
  travelled_ += (position - last_).norm();
  last_ = position;
  if (travelled_ >= min_distance_ && (position - start_).norm() < radius_) {
    ++laps_;
    travelled_ = 0.0;
    return true;
  }
  return false;
}

}  // namespace fsd::slam
