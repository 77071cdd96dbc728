#pragma once

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include "fsd/slam/fastslam.hpp"

namespace fsd::sim {

inline constexpr std::array<const char*, 21> kTelemetryColumns = {
    "t",     "X_true", "Y_true",   "psi_true",       "vx_true",   "vy_true", "r_true",
    "X_est", "Y_est",  "psi_est",  "vx_est",         "vy_est",    "r_est",   "n_eff",
    "map_size", "centerline_len", "delta_cmd", "D_cmd", "slack_max", "solve_ms", "corridor_violation_m"};

struct TelemetryRecord {
  std::array<double, kTelemetryColumns.size()> values{};
};

std::string telemetry_header();
std::string format_row(const TelemetryRecord& r);

/// Appends rows to a CSV file. Timestamps must increase strictly.
class TelemetryWriter {
 public:
  explicit TelemetryWriter(const std::string& path);
  void write(const TelemetryRecord& r);
  void flush() { out_.flush(); }
  [[nodiscard]] std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t rows_{0};
  double last_t_{-1e300};
};

/// JSON array of {x, y, color, quality, cov: [xx, xy, yy]}.
std::string map_json(const slam::LandmarkMap& map);
void write_map_json(const std::string& path, const slam::LandmarkMap& map);

struct ReplayMetrics {
  std::size_t ticks{0};
  double duration{0.0};
  double peak_speed{0.0};
  double max_corridor_violation{0.0};
  double pose_rms{0.0};
  double max_slack{0.0};
  double mean_solve_ms{0.0};
};

/// Reads a telemetry CSV. Throws ConfigError if the header does not match.
std::vector<TelemetryRecord> read_telemetry(const std::string& path);
ReplayMetrics replay_metrics(const std::vector<TelemetryRecord>& rows);

}  // namespace fsd::sim
