#include "fsd/ebs/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "fsd/core/error.hpp"

namespace fsd::ebs {

namespace {

struct ModeName {
  FailureMode mode;
  const char* name;
};

constexpr ModeName kModeNames[] = {
    {FailureMode::LargeLeak, "large_leakage"},
    {FailureMode::SmallLeak, "small_leakage"},
    {FailureMode::PartiallyBlocked, "partially_blocked"},
    {FailureMode::Blocked, "blocked"},
    {FailureMode::NoRegulation, "no_regulation"},
    {FailureMode::TooHigh, "too_high"},
    {FailureMode::TooLow, "too_low"},
    {FailureMode::LowFlowRate, "low_flow_rate"},
    {FailureMode::AlwaysOpen, "always_open"},
    {FailureMode::AlwaysClosed, "always_closed"},
    {FailureMode::NoResetToOpen, "no_reset_to_open"},
    {FailureMode::WrongPosition, "wrong_position"},
    {FailureMode::OutputDisconnected, "output_disconnected"},
    {FailureMode::ConstantWrongOutput, "constant_wrong_output"},
    {FailureMode::HydraulicLeakage, "hydraulic_leakage"},
    {FailureMode::WrongTransferFunction, "wrong_transfer_function"},
};

ComponentKind kind_from_string(const std::string& s) {
  if (s == "connection") return ComponentKind::Connection;
  if (s == "pressure_regulator") return ComponentKind::PressureRegulator;
  if (s == "electric_valve") return ComponentKind::ElectricValve;
  if (s == "manual_valve") return ComponentKind::ManualValve;
  if (s == "pressure_sensor") return ComponentKind::PressureSensor;
  if (s == "air_cylinder") return ComponentKind::AirCylinder;
  throw Error(ErrorCode::ConfigError, "unknown component kind '" + s + "'");
}

bool failed_with(const Component& c, FailureMode m) { return c.failure && c.failure->mode == m; }

double connection_conductance(const Component& c, const FailureParams& fp) {
  if (failed_with(c, FailureMode::Blocked)) return 0.0;
  if (failed_with(c, FailureMode::PartiallyBlocked)) return c.conductance * fp.partial_block_factor;
  return c.conductance;
}

double leak_conductance(const Component& c, const FailureParams& fp) {
  if (failed_with(c, FailureMode::LargeLeak)) return fp.large_leak;
  if (failed_with(c, FailureMode::SmallLeak)) return fp.small_leak;
  return 0.0;
}

double regulator_setpoint(const Component& c, const FailureParams& fp) {
  if (failed_with(c, FailureMode::NoRegulation)) return std::numeric_limits<double>::infinity();
  if (failed_with(c, FailureMode::TooHigh)) return fp.regulator_too_high;
  if (failed_with(c, FailureMode::TooLow)) return fp.regulator_too_low;
  return c.setpoint;
}

double regulator_conductance(const Component& c, const FailureParams& fp) {
  return failed_with(c, FailureMode::LowFlowRate) ? c.conductance * fp.low_flow_factor : c.conductance;
}

bool valve_energized(const Component& c) {
  if (failed_with(c, FailureMode::AlwaysOpen)) return false;
  if (failed_with(c, FailureMode::AlwaysClosed)) return true;
  if (failed_with(c, FailureMode::NoResetToOpen) && c.latched_energized) return true;
  return c.energized;
}

bool manual_venting(const Component& c) { return c.vent != failed_with(c, FailureMode::WrongPosition); }

double pressure_at(const Network& net, int node) { return node == kAtmosphere ? 0.0 : net.nodes[node].pressure; }

}  // namespace

std::string to_string(ComponentKind k) {
  switch (k) {
    case ComponentKind::Connection: return "connection";
    case ComponentKind::PressureRegulator: return "pressure_regulator";
    case ComponentKind::ElectricValve: return "electric_valve";
    case ComponentKind::ManualValve: return "manual_valve";
    case ComponentKind::PressureSensor: return "pressure_sensor";
    case ComponentKind::AirCylinder: return "air_cylinder";
  }
  return "?";
}

std::string to_string(FailureMode m) {
  for (const ModeName& mn : kModeNames) {
    if (mn.mode == m) return mn.name;
  }
  return "?";
}

FailureMode failure_mode_from_string(const std::string& s) {
  for (const ModeName& mn : kModeNames) {
    if (s == mn.name) return mn.mode;
  }
  throw Error(ErrorCode::ConfigError, "unknown failure mode '" + s + "'");
}

std::vector<FailureMode> modes_for(ComponentKind k) {
  switch (k) {
    case ComponentKind::Connection:
      return {FailureMode::LargeLeak, FailureMode::SmallLeak, FailureMode::PartiallyBlocked, FailureMode::Blocked};
    case ComponentKind::PressureRegulator:
      return {FailureMode::NoRegulation, FailureMode::TooHigh, FailureMode::TooLow, FailureMode::LowFlowRate};
    case ComponentKind::ElectricValve:
      return {FailureMode::AlwaysOpen, FailureMode::AlwaysClosed, FailureMode::NoResetToOpen};
    case ComponentKind::ManualValve: return {FailureMode::WrongPosition};
    case ComponentKind::PressureSensor: return {FailureMode::OutputDisconnected, FailureMode::ConstantWrongOutput};
    case ComponentKind::AirCylinder: return {FailureMode::HydraulicLeakage, FailureMode::WrongTransferFunction};
  }
  return {};
}

bool mode_valid_for(ComponentKind k, FailureMode m) {
  const std::vector<FailureMode> modes = modes_for(k);
  return std::find(modes.begin(), modes.end(), m) != modes.end();
}

std::string describe(const FailureSpec& f) {
  std::ostringstream os;
  os << f.component << ':' << to_string(f.mode);
  if (f.mode == FailureMode::ConstantWrongOutput) os << '@' << f.level;
  return os.str();
}

int Network::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return static_cast<int>(i);
  }
  return -2;
}

int Network::component_index(const std::string& id) const {
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

const Component* Network::find(const std::string& id) const {
  const int i = component_index(id);
  return i < 0 ? nullptr : &components[static_cast<std::size_t>(i)];
}

Component* Network::find(const std::string& id) {
  const int i = component_index(id);
  return i < 0 ? nullptr : &components[static_cast<std::size_t>(i)];
}

double Network::stored_air() const {
  double s = 0.0;
  for (const Node& n : nodes) {
    if (!n.hydraulic) s += n.volume * n.pressure;
  }
  return s;
}

double Network::stability_bound() const {
  std::vector<double> g(nodes.size(), 0.0);
  const auto add = [&](int node, double c) {
    if (node != kAtmosphere) g[static_cast<std::size_t>(node)] += c;
  };
  double bound = std::numeric_limits<double>::infinity();
  for (const Component& c : components) {
    switch (c.kind) {
      case ComponentKind::Connection: {
        const double gc = connection_conductance(c, failure_params);
        add(c.a, gc + leak_conductance(c, failure_params));
        add(c.b, gc);
        break;
      }
      case ComponentKind::PressureRegulator: {
        const double gc = std::max(regulator_conductance(c, failure_params), c.reverse_conductance);
        add(c.a, gc);
        add(c.b, gc);
        break;
      }
      case ComponentKind::ElectricValve:
        if (valve_energized(c)) {
          add(c.b, c.exhaust_conductance);
        } else {
          add(c.a, c.conductance);
          add(c.b, c.conductance);
        }
        break;
      case ComponentKind::ManualValve:
        if (manual_venting(c)) add(c.a, c.exhaust_conductance);
        break;
      case ComponentKind::AirCylinder: bound = std::min(bound, c.tau / 2.0); break;
      case ComponentKind::PressureSensor: break;
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].hydraulic || g[i] <= 0.0) continue;
    bound = std::min(bound, nodes[i].volume / g[i] / 2.0);
  }
  return bound;
}

double Network::sensor_reading(const std::string& id) const {
  const Component* c = find(id);
  if (c == nullptr || c->kind != ComponentKind::PressureSensor) {
    throw Error(ErrorCode::ConfigError, "no pressure sensor '" + id + "'");
  }
  if (failed_with(*c, FailureMode::OutputDisconnected)) return failure_params.floating_value;
  if (failed_with(*c, FailureMode::ConstantWrongOutput)) return c->failure->level;
  return pressure_at(*this, c->a);
}

std::vector<std::string> Network::sensor_ids() const {
  std::vector<std::string> ids;
  for (const Component& c : components) {
    if (c.kind == ComponentKind::PressureSensor) ids.push_back(c.id);
  }
  return ids;
}

void Network::command_valve(const std::string& base_id, bool on) {
  for (Component& c : components) {
    const bool match = c.id == base_id || (c.id.size() > base_id.size() + 1 &&
                                           c.id.compare(c.id.size() - base_id.size(), base_id.size(), base_id) == 0 &&
                                           c.id[c.id.size() - base_id.size() - 1] == '.');
    if (!match) continue;
    if (c.kind == ComponentKind::ElectricValve) {
      c.energized = on;
      if (on) c.latched_energized = true;
    } else if (c.kind == ComponentKind::ManualValve) {
      c.vent = on;
    }
  }
}

void step(Network& net, double dt) {
  if (!(dt > 0.0) || dt >= net.stability_bound()) {
    throw Error(ErrorCode::UnstableStep, "dt exceeds half the smallest circuit time constant");
  }
  const FailureParams& fp = net.failure_params;
  std::vector<double> inflow(net.nodes.size(), 0.0);
  const auto transfer = [&](int from, int to, double q) {
    if (from != kAtmosphere) inflow[static_cast<std::size_t>(from)] -= q;
    if (to != kAtmosphere) inflow[static_cast<std::size_t>(to)] += q;
  };

  for (const Component& c : net.components) {
    const double pa = pressure_at(net, c.a);
    const double pb = pressure_at(net, c.b);
    switch (c.kind) {
      case ComponentKind::Connection:
        transfer(c.a, c.b, connection_conductance(c, fp) * (pa - pb));
        transfer(c.a, kAtmosphere, leak_conductance(c, fp) * pa);
        break;
      case ComponentKind::PressureRegulator: {
        const double target = std::min(pa, regulator_setpoint(c, fp));
        if (pb < target) {
          transfer(c.a, c.b, regulator_conductance(c, fp) * (target - pb));
        } else if (pb > pa) {
          transfer(c.b, c.a, c.reverse_conductance * (pb - pa));
        }
        break;
      }
      case ComponentKind::ElectricValve:
        if (valve_energized(c)) {
          transfer(c.b, kAtmosphere, c.exhaust_conductance * pb);
        } else {
          transfer(c.a, c.b, c.conductance * (pa - pb));
        }
        break;
      case ComponentKind::ManualValve:
        if (manual_venting(c)) transfer(c.a, kAtmosphere, c.exhaust_conductance * pa);
        break;
      case ComponentKind::PressureSensor:
      case ComponentKind::AirCylinder: break;
    }
  }

  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    Node& n = net.nodes[i];
    if (n.hydraulic) continue;
    n.pressure += dt * inflow[i] / n.volume;
    if (n.pressure < kVacuumGauge) {
      n.pressure = kVacuumGauge;
      ++net.clamp_count;
    }
  }

  for (Component& c : net.components) {
    if (c.kind != ComponentKind::AirCylinder) continue;
    Node& h = net.nodes[static_cast<std::size_t>(c.b)];
    const double gain = failed_with(c, FailureMode::WrongTransferFunction) ? c.gain * fp.transfer_factor : c.gain;
    const double target = gain * std::max(0.0, pressure_at(net, c.a) - c.preload) * c.fluid;
    h.pressure += dt * (target - h.pressure) / c.tau;
    if (failed_with(c, FailureMode::HydraulicLeakage)) {
      c.fluid = std::max(0.0, c.fluid - dt * fp.hydraulic_leak_rate * std::max(0.0, h.pressure) / c.reference_pressure);
    }
  }
  net.t += dt;
}

Network inject(const Network& net, const std::vector<FailureSpec>& failures) {
  Network out = net;
  for (const FailureSpec& f : failures) {
    Component* c = out.find(f.component);
    if (c == nullptr) throw Error(ErrorCode::ConfigError, "unknown component '" + f.component + "'");
    if (!mode_valid_for(c->kind, f.mode)) {
      throw Error(ErrorCode::IncompatibleMode, to_string(f.mode) + " does not apply to " + to_string(c->kind));
    }
    if (c->failure) throw Error(ErrorCode::IncompatibleMode, "component '" + f.component + "' already failed");
    c->failure = f;
  }
  return out;
}

Network remove_sensor(const Network& net, const std::string& id) {
  Network out = net;
  const int i = out.component_index(id);
  if (i < 0 || out.components[static_cast<std::size_t>(i)].kind != ComponentKind::PressureSensor) {
    throw Error(ErrorCode::ConfigError, "no pressure sensor '" + id + "'");
  }
  out.components.erase(out.components.begin() + i);
  return out;
}

std::vector<FailureSpec> failure_catalog(const Network& net) {
  std::vector<FailureSpec> all;
  for (const Component& c : net.components) {
    for (FailureMode m : modes_for(c.kind)) {
      if (m == FailureMode::ConstantWrongOutput) {
        for (double level : net.failure_params.stuck_levels) all.push_back({c.id, m, level});
      } else {
        all.push_back({c.id, m, 0.0});
      }
    }
  }
  return all;
}

Network parse_circuit(const std::string& json_text, InitialState init) {
  using nlohmann::json;
  Network net;
  try {
    const json j = json::parse(json_text);
    net.circuits = j.value("circuits", std::vector<std::string>{""});
    net.tank_nodes = j.value("tank_nodes", std::vector<std::string>{});
    if (j.contains("failure_params")) {
      const json& f = j.at("failure_params");
      FailureParams& fp = net.failure_params;
      fp.large_leak = f.value("large_leakage", fp.large_leak);
      fp.small_leak = f.value("small_leakage", fp.small_leak);
      fp.partial_block_factor = f.value("partial_block_factor", fp.partial_block_factor);
      fp.regulator_too_high = f.value("regulator_too_high", fp.regulator_too_high);
      fp.regulator_too_low = f.value("regulator_too_low", fp.regulator_too_low);
      fp.low_flow_factor = f.value("low_flow_factor", fp.low_flow_factor);
      fp.floating_value = f.value("floating_value", fp.floating_value);
      fp.stuck_levels = f.value("stuck_levels", fp.stuck_levels);
      fp.transfer_factor = f.value("transfer_factor", fp.transfer_factor);
      fp.hydraulic_leak_rate = f.value("hydraulic_leak_rate", fp.hydraulic_leak_rate);
    }

    for (const std::string& prefix : net.circuits) {
      const std::string pre = prefix.empty() ? "" : prefix + ".";
      for (const json& n : j.at("nodes")) {
        Node node;
        node.name = pre + n.at("name").get<std::string>();
        node.hydraulic = n.value("hydraulic", false);
        node.volume = n.value("volume", 0.0);
        if (!node.hydraulic && !(node.volume > 0.0)) {
          throw Error(ErrorCode::ConfigError, "node '" + node.name + "' needs a positive volume");
        }
        node.pressure = init == InitialState::Pressurized ? n.value("pressurized", 0.0) : 0.0;
        net.nodes.push_back(node);
      }
      const auto node_ref = [&](const json& c, const char* key) {
        if (!c.contains(key)) return kAtmosphere;
        const std::string name = c.at(key).get<std::string>();
        if (name == "atm") return kAtmosphere;
        const int idx = net.node_index(pre + name);
        if (idx < 0) throw Error(ErrorCode::ConfigError, "unknown node '" + name + "'");
        return idx;
      };
      for (const json& c : j.at("components")) {
        Component comp;
        comp.id = pre + c.at("id").get<std::string>();
        comp.kind = kind_from_string(c.at("kind").get<std::string>());
        comp.a = node_ref(c, "a");
        comp.b = node_ref(c, "b");
        comp.conductance = c.value("conductance", comp.conductance);
        comp.setpoint = c.value("setpoint", comp.setpoint);
        comp.reverse_conductance = c.value("reverse_conductance", comp.reverse_conductance);
        comp.exhaust_conductance = c.value("exhaust_conductance", comp.exhaust_conductance);
        comp.gain = c.value("gain", comp.gain);
        comp.preload = c.value("preload", comp.preload);
        comp.tau = c.value("tau", comp.tau);
        comp.reference_pressure = c.value("reference_pressure", comp.reference_pressure);
        if (comp.conductance <= 0.0 || comp.exhaust_conductance <= 0.0 || comp.tau <= 0.0) {
          throw Error(ErrorCode::ConfigError, "component '" + comp.id + "' needs positive resistances");
        }
        if (comp.kind == ComponentKind::PressureSensor && comp.a == kAtmosphere) {
          throw Error(ErrorCode::ConfigError, "sensor '" + comp.id + "' is not attached to a node");
        }
        if (comp.kind == ComponentKind::AirCylinder &&
            (comp.b == kAtmosphere || !net.nodes[static_cast<std::size_t>(comp.b)].hydraulic)) {
          throw Error(ErrorCode::ConfigError, "cylinder '" + comp.id + "' needs a hydraulic output node");
        }
        net.components.push_back(comp);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("circuit file: ") + e.what());
  }
  return net;
}

Network load_circuit(const std::string& path, InitialState init) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open circuit file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_circuit(ss.str(), init);
}

}  // namespace fsd::ebs
