#pragma once

// Couples grid, network, devices and attacker into one run. Each grid step
// solves the power flow first, then lets the devices act on the new state.

#include <memory>
#include <string>
#include <vector>

#include "scadatwin/attacker.hpp"
#include "scadatwin/capture.hpp"
#include "scadatwin/devices.hpp"
#include "scadatwin/netsim.hpp"
#include "scadatwin/powergrid.hpp"

namespace scadatwin::sim {

struct SimulationInput {
  std::string scenario = "baseline";
  int repetition = 0;
  net::Topology topology;
  net::SimConfig sim;
  std::vector<devices::DeviceSpec> devices;
  devices::DataPointMap points;
  grid::GridModel grid;
  grid::Injections initial_injections;
  grid::SetpointSchedule schedule;
  devices::DeviceTiming timing;
  attack::AttackScript script;
  std::vector<std::string> power_points{devices::lv_busbar_point, devices::transformer_point};

  /// Cross-checks every reference; throws ConfigError / MalformedModel /
  /// BlacklistViolation / ScriptInvariantBroken / Unimplemented.
  void validate() const;
};

class World {
 public:
  explicit World(const SimulationInput& input);
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  /// Advances the clock, running every event strictly before `t`.
  void run_until(net::SimTime t);
  /// Runs to the configured duration and closes the attack.
  void run();
  capture::RunOutputs outputs() const;

  net::Network& network();
  devices::Plant& plant();
  devices::Mtu& mtu();
  devices::Hmi& hmi();
  devices::Rtu& rtu(const std::string& host_id);
  attack::Attacker& attacker();
  const std::vector<TruthEvent>& truth() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

capture::RunOutputs run(const SimulationInput& input);

}  // namespace scadatwin::sim
