#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fsd::ebs {

// Pressures are gauge bar, volumes litres, conductances L/s, so a flow of
// g * dp is in bar*L/s and V * dp/dt sums the flows into a node.

inline constexpr int kAtmosphere = -1;
inline constexpr double kVacuumGauge = -1.01325;

enum class ComponentKind {
  Connection,
  PressureRegulator,
  ElectricValve,
  ManualValve,
  PressureSensor,
  AirCylinder,
};

enum class FailureMode {
  LargeLeak,
  SmallLeak,
  PartiallyBlocked,
  Blocked,
  NoRegulation,
  TooHigh,
  TooLow,
  LowFlowRate,
  AlwaysOpen,
  AlwaysClosed,
  NoResetToOpen,
  WrongPosition,
  OutputDisconnected,
  ConstantWrongOutput,
  HydraulicLeakage,
  WrongTransferFunction,
};

std::string to_string(ComponentKind k);
std::string to_string(FailureMode m);
FailureMode failure_mode_from_string(const std::string& s);
bool mode_valid_for(ComponentKind k, FailureMode m);
std::vector<FailureMode> modes_for(ComponentKind k);

struct FailureSpec {
  std::string component;
  FailureMode mode{FailureMode::Blocked};
  double level{0.0};  // sensor reading for ConstantWrongOutput

  bool operator==(const FailureSpec&) const = default;
};

std::string describe(const FailureSpec& f);

/// Magnitudes used when a failure mode is injected.
struct FailureParams {
  double large_leak{0.3};
  double small_leak{0.01};
  double partial_block_factor{0.02};
  double regulator_too_high{7.5};
  double regulator_too_low{4.0};
  double low_flow_factor{0.02};
  double floating_value{-1.0};
  std::vector<double> stuck_levels{0.0, 2.5, 5.0, 7.5, 10.0};
  double transfer_factor{0.5};
  double hydraulic_leak_rate{0.1};  // fluid fraction lost per second at reference pressure
};

struct Node {
  std::string name;
  double volume{0.0};
  double pressure{0.0};
  bool hydraulic{false};  // set by a cylinder two-port, not integrated
};

struct Component {
  std::string id;
  ComponentKind kind{ComponentKind::Connection};
  int a{kAtmosphere};  // inlet / measured node
  int b{kAtmosphere};  // outlet node
  double conductance{1.0};
  // Regulator.
  double setpoint{6.0};
  double reverse_conductance{0.5};
  // Electric valve: supply a->b while de-energized, b vents while energized.
  // Manual valve: a vents to atmosphere in the Vent position.
  double exhaust_conductance{1.0};
  // Cylinder: hydraulic node b follows gain * (p_a - preload) with lag tau.
  double gain{10.0};
  double preload{0.5};
  double tau{0.02};
  double reference_pressure{50.0};

  // Commanded state.
  bool energized{false};
  bool vent{false};

  // Internal state.
  bool latched_energized{false};
  double fluid{1.0};

  std::optional<FailureSpec> failure;
};

struct Network {
  std::vector<Node> nodes;
  std::vector<Component> components;
  std::vector<std::string> circuits;  // prefixes, e.g. "front"
  std::vector<std::string> tank_nodes;
  FailureParams failure_params;
  double t{0.0};
  long clamp_count{0};

  [[nodiscard]] int node_index(const std::string& name) const;
  [[nodiscard]] int component_index(const std::string& id) const;
  [[nodiscard]] const Component* find(const std::string& id) const;
  Component* find(const std::string& id);

  /// Sum of V * p over pneumatic nodes.
  [[nodiscard]] double stored_air() const;
  /// Largest stable explicit Euler step for the current configuration.
  [[nodiscard]] double stability_bound() const;

  [[nodiscard]] double sensor_reading(const std::string& id) const;
  [[nodiscard]] std::vector<std::string> sensor_ids() const;

  /// Sets `energized` / `vent` on every component with the given base id.
  void command_valve(const std::string& base_id, bool on);
};

/// Advances the network by one explicit Euler step. Throws UnstableStep when
/// dt is not below half the smallest node time constant.
void step(Network& net, double dt);

/// Returns a copy with the failure behaviours applied. Throws IncompatibleMode
/// for a mode that does not fit the component kind or a doubly failed
/// component, ConfigError for an unknown component.
Network inject(const Network& net, const std::vector<FailureSpec>& failures);

/// Drops a sensor from the model.
Network remove_sensor(const Network& net, const std::string& id);

/// Every single failure the model supports, stuck sensors at each level.
std::vector<FailureSpec> failure_catalog(const Network& net);

enum class InitialState { Pressurized, Vented };

/// Loads the circuit file and instantiates one copy of the template per
/// circuit prefix. Throws ConfigError on malformed input.
Network load_circuit(const std::string& path, InitialState init = InitialState::Pressurized);
Network parse_circuit(const std::string& json_text, InitialState init = InitialState::Pressurized);

}  // namespace fsd::ebs
