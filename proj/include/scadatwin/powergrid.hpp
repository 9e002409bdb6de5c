#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace scadatwin::grid {

enum class BranchKind { line, transformer };
enum class AssetKind { bss, pv, load };

struct Bus {
  std::string id;
  double nominal_kv = 0.4;
};

/// Impedances in ohm, referred to the voltage level of `to_bus`.
struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double resistance = 0.0;
  double reactance = 0.0;
  BranchKind kind = BranchKind::line;
  double rating_kva = 0.0;
};

/// Active power limits, injection positive (a load has p_max <= 0).
struct Asset {
  std::string id;
  std::string bus;
  AssetKind kind = AssetKind::load;
  double p_min = 0.0;
  double p_max = 0.0;
};

struct GridModel {
  std::vector<Bus> buses;
  std::string slack_bus;
  std::vector<Branch> branches;
  std::vector<Asset> assets;
  double base_mva = 1.0;

  /// Throws MalformedModel if the network is not a connected radial tree
  /// rooted at a single slack bus, or assets are inconsistent.
  void validate() const;
  const Asset& asset(const std::string& id) const;
};

struct BusVoltage {
  double magnitude = 1.0;  // p.u.
  double angle = 0.0;      // rad
  friend bool operator==(const BusVoltage&, const BusVoltage&) = default;
};

struct GridState {
  double time = 0.0;
  std::map<std::string, BusVoltage> bus_voltages;
  std::map<std::string, double> asset_powers;  // kW, injection positive
  double slack_p = 0.0;                        // kW drawn from the slack
  double losses = 0.0;                         // kW
  double transformer_loading = 0.0;            // kW through the transformer (source side)
  double lv_busbar_p = 0.0;                    // kW entering the LV busbar
  int iterations = 0;
  friend bool operator==(const GridState&, const GridState&) = default;
};

using Injections = std::map<std::string, double>;

inline constexpr double default_tolerance = 1e-6;
inline constexpr int default_max_iterations = 50;

/// Forward-backward sweep power flow. Reactive injections are zero.
/// Throws NoConvergence when the iteration cap is reached without the
/// voltage update falling below `tolerance`, MalformedModel on topology
/// errors and UnknownAsset for injections naming missing assets.
GridState solve_power_flow(const GridModel& model, const Injections& injections, double time = 0.0,
                           double tolerance = default_tolerance, int max_iterations = default_max_iterations);

/// Clamp a target to the asset's [p_min, p_max].
double apply_setpoint(const GridModel& model, const std::string& asset_id, double p_target);

struct ScheduleEntry {
  double time = 0.0;
  std::string asset_id;
  double p_target = 0.0;
};

struct SetpointSchedule {
  std::vector<ScheduleEntry> entries;
  double cadence = 30.0;

  /// Per asset, entries must be strictly increasing in time.
  void validate() const;
  /// Entries with time in (t - step, t].
  std::vector<ScheduleEntry> due(double t, double step) const;
};

/// Most recent entry at or before t per asset; 0 kW for assets without one.
Injections schedule_injection(const SetpointSchedule& schedule, double t);

/// Fills `entries` by cycling `values` every `cadence` seconds over [0, duration).
SetpointSchedule cyclic_schedule(const std::string& asset_id, const std::vector<double>& values, double cadence,
                                 double duration);

const char* to_string(AssetKind k);
const char* to_string(BranchKind k);
AssetKind asset_kind_from(const std::string& s);
BranchKind branch_kind_from(const std::string& s);

}  // namespace scadatwin::grid
