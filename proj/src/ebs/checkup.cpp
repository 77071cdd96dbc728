#include "fsd/ebs/checkup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "fsd/core/error.hpp"

namespace fsd::ebs {

namespace {

std::vector<CheckStep> parse_steps(const nlohmann::json& arr) {
  std::vector<CheckStep> steps;
  for (const nlohmann::json& s : arr) {
    CheckStep st;
    st.name = s.value("name", std::string{});
    st.wait = s.value("wait", 0.0);
    if (st.wait < 0.0) throw Error(ErrorCode::ConfigError, "negative wait in step '" + st.name + "'");
    st.mark = s.value("mark", std::string{});
    if (s.contains("commands")) {
      for (const auto& [valve, on] : s.at("commands").items()) st.commands.push_back({valve, on.get<bool>()});
    }
    if (s.contains("assert")) {
      for (const nlohmann::json& a : s.at("assert")) {
        Assertion as;
        as.sensor = a.at("sensor").get<std::string>();
        as.min = a.value("min", as.min);
        as.max = a.value("max", as.max);
        as.since = a.value("since", std::string{});
        st.assertions.push_back(as);
      }
    }
    steps.push_back(std::move(st));
  }
  return steps;
}

std::string full_id(const std::string& prefix, const std::string& base) {
  return prefix.empty() ? base : prefix + "." + base;
}

}  // namespace

CheckSequence parse_sequence(const std::string& json_text) {
  CheckSequence seq;
  try {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    seq.dt = j.value("dt", seq.dt);
    seq.autonomous = parse_steps(j.at("autonomous"));
    seq.manual = parse_steps(j.at("manual"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("sequence file: ") + e.what());
  }
  if (!(seq.dt > 0.0)) throw Error(ErrorCode::ConfigError, "sequence dt must be positive");
  return seq;
}

CheckSequence load_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open sequence file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sequence(ss.str());
}

std::string to_string(CheckupOutcome o) {
  switch (o) {
    case CheckupOutcome::ReadyAutonomous: return "ready_autonomous";
    case CheckupOutcome::ReadyManual: return "ready_manual";
    case CheckupOutcome::Fault: return "fault";
  }
  return "?";
}

CheckupVerdict checkup(Network net, CheckMode mode, const CheckSequence& seq) {
  CheckupVerdict v;
  v.sensors = net.sensor_ids();
  const auto readings = [&] {
    std::vector<double> r;
    r.reserve(v.sensors.size());
    for (const std::string& id : v.sensors) r.push_back(net.sensor_reading(id));
    return r;
  };
  std::map<std::string, std::vector<double>> marks;
  const std::vector<CheckStep>& steps = seq.steps(mode);

  bool failed = false;
  for (std::size_t si = 0; si < steps.size() && !failed; ++si) {
    const CheckStep& st = steps[si];
    for (const ValveCommand& c : st.commands) net.command_valve(c.valve, c.on);
    const long n = std::lround(st.wait / seq.dt);
    for (long i = 0; i < n; ++i) step(net, seq.dt);

    const std::vector<double> now = readings();
    v.trace.push_back({st.name, net.t, now});
    for (const Assertion& a : st.assertions) {
      for (const std::string& prefix : net.circuits) {
        const std::string id = full_id(prefix, a.sensor);
        const auto it = std::find(v.sensors.begin(), v.sensors.end(), id);
        if (it == v.sensors.end()) continue;
        const std::size_t k = static_cast<std::size_t>(it - v.sensors.begin());
        double value = now[k];
        if (!a.since.empty()) {
          const auto m = marks.find(a.since);
          if (m == marks.end()) throw Error(ErrorCode::ConfigError, "unknown mark '" + a.since + "'");
          value -= m->second[k];
        }
        if (value < a.min || value > a.max) {
          failed = true;
          v.failed_step = static_cast<int>(si);
          std::ostringstream os;
          os << st.name << ": " << id << (a.since.empty() ? "" : " change") << " = " << value << " outside ["
             << a.min << ", " << a.max << "]";
          v.failed_check = os.str();
          break;
        }
      }
      if (failed) break;
    }
    if (!st.mark.empty()) marks[st.mark] = now;
  }

  v.outcome = failed ? CheckupOutcome::Fault
                     : (mode == CheckMode::Manual ? CheckupOutcome::ReadyManual : CheckupOutcome::ReadyAutonomous);
  for (const std::string& prefix : net.circuits) {
    for (const std::string& tank : net.tank_nodes) {
      const int idx = net.node_index(full_id(prefix, tank));
      if (idx >= 0) v.tank_pressure = std::max(v.tank_pressure, net.nodes[static_cast<std::size_t>(idx)].pressure);
    }
  }
  return v;
}

}  // namespace fsd::ebs
