#pragma once

#include <cstdint>
#include <random>

namespace fsd {

/// Seeded random source. Identical (seed, stream) pairs yield identical draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }

  /// Independent child stream; does not advance this stream.
  [[nodiscard]] RngStream derive(std::uint64_t sub_stream) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double sigma = 1.0);
  std::size_t index(std::size_t n);  // uniform in [0, n)

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Cheap splitmix64 sequence for short-lived per-item streams (one per
/// particle per tick). Same key => same sequence.
class LightRng {
 public:
  explicit LightRng(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64();
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double normal(double mean = 0.0, double sigma = 1.0);

 private:
  std::uint64_t state_;
  double spare_{0.0};
  bool has_spare_{false};
};

}  // namespace fsd
