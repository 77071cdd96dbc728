#include "fsd/sim/telemetry.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "fsd/core/error.hpp"

namespace fsd::sim {

std::string telemetry_header() {
  std::string h;
  for (std::size_t i = 0; i < kTelemetryColumns.size(); ++i) {
    if (i > 0) h += ',';
    h += kTelemetryColumns[i];
  }
  return h;
}

std::string format_row(const TelemetryRecord& r) {
  std::string line;
  char buf[32];
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (i > 0) line += ',';
    // %.6f keeps files byte-stable across runs; -0 is normalised.
    const double v = r.values[i] == 0.0 ? 0.0 : r.values[i];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    line += buf;
  }
  return line;
}

TelemetryWriter::TelemetryWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::ConfigError, "cannot write telemetry to " + path);
  out_ << telemetry_header() << '\n';
}

void TelemetryWriter::write(const TelemetryRecord& r) {
  if (!(r.values[0] > last_t_)) throw std::logic_error("telemetry timestamps must increase");
  last_t_ = r.values[0];
  out_ << format_row(r) << '\n';
  ++rows_;
}

std::string map_json(const slam::LandmarkMap& map) {
  nlohmann::json arr = nlohmann::json::array();
  for (const slam::ConeLandmark& lm : map) {
    arr.push_back({{"x", lm.mean.x()},
                   {"y", lm.mean.y()},
                   {"color", std::string(to_string(lm.colors.most_likely()))},
                   {"quality", lm.quality()},
                   {"cov", {lm.cov(0, 0), lm.cov(0, 1), lm.cov(1, 1)}}});
  }
  return arr.dump(2);
}

void write_map_json(const std::string& path, const slam::LandmarkMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write map to " + path);
  out << map_json(map) << '\n';
}

std::vector<TelemetryRecord> read_telemetry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open telemetry " + path);
  std::string line;
  if (!std::getline(in, line) || line != telemetry_header()) {
    throw Error(ErrorCode::ConfigError, "unexpected telemetry header in " + path);
  }
  std::vector<TelemetryRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TelemetryRecord r;
    std::istringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= r.values.size()) throw Error(ErrorCode::ConfigError, "too many telemetry columns");
      r.values[i++] = std::stod(cell);
    }
    if (i != r.values.size()) throw Error(ErrorCode::ConfigError, "too few telemetry columns");
    rows.push_back(r);
  }
  return rows;
}

ReplayMetrics replay_metrics(const std::vector<TelemetryRecord>& rows) {
  ReplayMetrics m;
  m.ticks = rows.size();
  if (rows.empty()) return m;
  m.duration = rows.back().values[0];
  double sq = 0.0;
  double solve = 0.0;
  for (const TelemetryRecord& r : rows) {
    const auto& v = r.values;
    m.peak_speed = std::max(m.peak_speed, v[4]);
    m.max_corridor_violation = std::max(m.max_corridor_violation, v[20]);
    m.max_slack = std::max(m.max_slack, v[18]);
    sq += (v[1] - v[7]) * (v[1] - v[7]) + (v[2] - v[8]) * (v[2] - v[8]);
    solve += v[19];
  }
  m.pose_rms = std::sqrt(sq / rows.size());
  m.mean_solve_ms = solve / rows.size();
  return m;
}

}  // namespace fsd::sim
