#pragma once

// Scenario configuration document: one JSON object per scenario whose keys
// mirror the run inputs. Missing keys fall back to the built-in defaults.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scadatwin/attacker.hpp"
#include "scadatwin/ids.hpp"
#include "scadatwin/simulation.hpp"

namespace scadatwin::config {

struct IdsConfig {
  std::vector<ids::SignatureRule> rules = ids::default_rules();
  ids::StatConfig stat;
  double tolerance_s = 2.0;
  ids::LabelMapping mapping = ids::default_label_mapping();
  std::vector<std::string> keywords{"recv", "install-tamper", "tail", "nc", "chmod"};
  bool relax_isr = false;
  double cycle_gap_s = 0.5;
  std::vector<std::string> extra_allowed_addresses;
};

/// Setpoints cycling through `values` every `cadence` seconds, expanded
/// over the run duration when the run is built.
struct CyclicSchedule {
  std::string asset;
  std::vector<double> values;
  double cadence = 30.0;
};

struct ScenarioConfig {
  std::string scenario = "baseline";
  int repetitions = 5;
  net::Topology topology;
  net::SimConfig sim;
  std::vector<devices::DeviceSpec> devices;
  devices::DataPointMap points;
  grid::GridModel grid;
  grid::Injections initial_injections;
  grid::SetpointSchedule schedule;
  std::optional<CyclicSchedule> cyclic;
  devices::DeviceTiming timing;
  attack::ScenarioParams attack;
  /// Custom script; when absent the built-in script for `scenario` is used.
  std::optional<std::vector<attack::Step>> steps;
  IdsConfig ids;

  /// Builds one run's input to check every cross-reference.
  void validate() const;
};

/// Full default configuration; throws ConfigError for unknown scenarios.
ScenarioConfig default_config(const std::string& scenario = "baseline");

std::string to_json_text(const ScenarioConfig& cfg);
/// Throws ConfigError on syntax errors, unknown enum values or bad types.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& file);
void save_config(const ScenarioConfig& cfg, const std::filesystem::path& file);

sim::SimulationInput simulation_input(const ScenarioConfig& cfg, net::Mode mode, std::uint64_t seed,
                                      int repetition = 0);

/// Allowlists derived from the configuration alone.
ids::SpecModel spec_model(const ScenarioConfig& cfg);

}  // namespace scadatwin::config
