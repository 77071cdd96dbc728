#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "fsd/core/error.hpp"
#include "fsd/core/mission.hpp"
#include "fsd/ebs/coverage.hpp"
#include "fsd/sim/mission.hpp"
#include "fsd/sim/telemetry.hpp"
#include "fsd/slam/mission_priors.hpp"

namespace {

constexpr int kExitFailed = 2;
constexpr int kExitConfig = 3;

fsd::sim::Interval parse_interval(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw fsd::Error(fsd::ErrorCode::ConfigError, "expected START:END, got " + s);
  try {
    const fsd::sim::Interval i{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    if (!(i.end > i.start)) throw fsd::Error(fsd::ErrorCode::ConfigError, "empty interval " + s);
    return i;
  } catch (const std::logic_error&) {
    throw fsd::Error(fsd::ErrorCode::ConfigError, "bad interval " + s);
  }
}

int run_command(const std::string& mission, std::uint64_t seed, const std::string& config, const std::string& out,
                const std::vector<std::string>& gnss, const std::vector<std::string>& gss) {
  fsd::sim::MissionConfig mc;
  try {
    mc.mission = fsd::mission_from_string(mission);
    mc.sim = fsd::sim::load_config(config);
    for (const std::string& s : gnss) mc.gnss_outages.push_back(parse_interval(s));
    for (const std::string& s : gss) mc.gss_outages.push_back(parse_interval(s));
  } catch (const fsd::Error& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }
  mc.seed = seed;
  mc.out_dir = out;
  fsd::sim::MissionResult r;
  try {
    r = fsd::sim::run_mission(mc);
  } catch (const fsd::Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == fsd::ErrorCode::ConfigError ? kExitConfig : kExitFailed;
  }
  std::printf("mission=%s seed=%llu completed=%s reason=\"%s\" ticks=%zu distance=%.2f peak_kmh=%.2f "
              "max_violation=%.3f",
              mission.c_str(), static_cast<unsigned long long>(seed), r.completed ? "true" : "false",
              r.reason.c_str(), r.ticks, r.distance, r.peak_speed * 3.6, r.max_corridor_violation);
  for (std::size_t i = 0; i < r.lap_times.size(); ++i) std::printf(" lap%zu=%.2f", i + 1, r.lap_times[i]);
  if (r.last_lap_pose_rms > 0.0) std::printf(" last_lap_pose_rms=%.3f", r.last_lap_pose_rms);
  std::printf("\n");
  if (!r.telemetry_path.empty()) std::printf("telemetry=%s map=%s\n", r.telemetry_path.c_str(), r.map_path.c_str());
  return r.completed ? 0 : kExitFailed;
}

int ebs_command(int k, const std::string& circuit, const std::string& sequence, const std::string& out,
                std::size_t budget, std::uint64_t seed, const std::vector<std::string>& removed) {
  fsd::ebs::Network net;
  fsd::ebs::CheckSequence seq;
  try {
    net = fsd::ebs::load_circuit(circuit);
    seq = fsd::ebs::load_sequence(sequence);
    for (const std::string& id : removed) net = fsd::ebs::remove_sensor(net, id);
  } catch (const fsd::Error& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }
  fsd::ebs::CoverageOptions opt;
  opt.max_simultaneous = k;
  opt.budget = budget;
  opt.seed = seed;
  const fsd::ebs::CoverageReport report = fsd::ebs::coverage_report(net, seq, opt);
  for (const fsd::ebs::CoverageLevel& l : report.levels) {
    std::printf("k=%d combinations=%.0f evaluated=%zu%s detected=%zu fraction=%.4f manual_unsafe_undetected=%zu\n",
                l.k, l.combinations, l.evaluated, l.sampled ? " (sampled)" : "", l.detected, l.fraction(),
                l.manual_unsafe);
  }
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) {
      std::cerr << "cannot write " << out << '\n';
      return kExitConfig;
    }
    f << fsd::ebs::report_json(report) << '\n';
  }
  return 0;
}

int replay_command(const std::string& path, bool metrics) {
  std::vector<fsd::sim::TelemetryRecord> rows;
  try {
    rows = fsd::sim::read_telemetry(path);
  } catch (const fsd::Error& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }
  std::printf("rows=%zu\n", rows.size());
  if (metrics) {
    const fsd::sim::ReplayMetrics m = fsd::sim::replay_metrics(rows);
    std::printf("duration_s=%.3f peak_kmh=%.2f max_corridor_violation_m=%.3f pose_rms_m=%.3f max_slack=%.4f "
                "mean_solve_ms=%.3f\n",
                m.duration, m.peak_speed * 3.6, m.max_corridor_violation, m.pose_rms, m.max_slack, m.mean_solve_ms);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driverless stack desk simulator"};
  app.require_subcommand(1);

  std::string mission = "acceleration";
  std::uint64_t seed = 1;
  std::string config = fsd::slam::data_path("default.cfg");
  std::string out;
  std::vector<std::string> gnss;
  std::vector<std::string> gss;
  CLI::App* run = app.add_subcommand("run", "Run one closed-loop mission");
  run->add_option("--mission", mission, "acceleration | skidpad | autocross | trackdrive")->required();
  run->add_option("--seed", seed, "Random seed");
  run->add_option("--config", config, "Key-value config file");
  run->add_option("--out", out, "Output directory for telemetry.csv and map.json");
  run->add_option("--gnss-outage", gnss, "GNSS outage START:END in seconds (repeatable)");
  run->add_option("--gss-outage", gss, "GSS outage START:END in seconds (repeatable)");

  int max_failures = 1;
  std::string circuit = fsd::slam::data_path("ebs_circuit.json");
  std::string sequence = fsd::slam::data_path("ebs_checkup.json");
  std::string report;
  std::size_t budget = 1500;
  std::uint64_t ebs_seed = 1;
  std::vector<std::string> removed;
  CLI::App* ebs = app.add_subcommand("ebs-verify", "Check-up coverage over injected EBS failures");
  ebs->add_option("--max-failures", max_failures, "Simultaneous failures, 1..3")->check(CLI::Range(1, 3));
  ebs->add_option("--circuit", circuit, "Circuit JSON");
  ebs->add_option("--sequence", sequence, "Check-up sequence JSON");
  ebs->add_option("--out", report, "Report JSON");
  ebs->add_option("--budget", budget, "Combinations per level before sampling");
  ebs->add_option("--seed", ebs_seed, "Sampling seed");
  ebs->add_option("--remove-sensor", removed, "Drop a sensor from the model, e.g. front.S_T1");

  std::string telemetry;
  bool metrics = false;
  CLI::App* replay = app.add_subcommand("replay", "Summarise a telemetry file");
  replay->add_option("--telemetry", telemetry, "telemetry.csv")->required();
  replay->add_flag("--metrics", metrics, "Print summary metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*run) return run_command(mission, seed, config, out, gnss, gss);
  if (*ebs) return ebs_command(max_failures, circuit, sequence, report, budget, ebs_seed, removed);
  return replay_command(telemetry, metrics);
}
