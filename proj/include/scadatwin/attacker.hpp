#pragma once

// Scripted multi-hop intrusions: capabilities, script validation, the
// client engine that drives them over the emulated network, and the
// built-in scenarios.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scadatwin/devices.hpp"
#include "scadatwin/netsim.hpp"
#include "scadatwin/truth.hpp"

namespace scadatwin::attack {

struct TelnetConnect {
  std::string session;
  std::string target;               // address
  std::optional<std::string> via;   // session to hop through
  devices::Credentials credentials;
};

struct ExecCommand {
  std::string session;
  std::string command;
};

struct TransferFile {
  std::string session;
  std::string file_name;
  std::size_t size_bytes = 4096;
  std::size_t chunk_bytes = 1024;
  std::string content;  // generated when empty
};

struct NetworkScan {
  std::vector<std::string> addresses;
  std::vector<std::uint16_t> ports;
  net::SimTime probe_interval_ms = 10;
};

/// Recognised in scripts but not supported by the engine.
struct SshConnect {
  std::string session;
  std::string target;
};

using Capability = std::variant<TelnetConnect, ExecCommand, TransferFile, NetworkScan, SshConnect>;

struct Step {
  double at = 0.0;  // s
  std::string label;
  Capability action;
};

struct AttackScript {
  std::string attacker_host;  // topology host id
  std::vector<std::string> blacklist;
  std::vector<Step> steps;

  /// Throws BlacklistViolation for any blacklisted address, Unimplemented
  /// for SSH, ScriptInvariantBroken for time-disorder or sessions used
  /// before they are opened, ConfigError for an unknown attacker host.
  void validate(const net::Topology& topology) const;
};

/// "a.b.c.d" or "a.b.c.d-a.b.c.e" (same /24) expanded into addresses.
std::vector<std::string> expand_range(const std::string& range);

/// Failure labels that replace a step's label in the ground truth.
inline const std::string login_failed = "login_failed";
inline const std::string connection_refused = "connection_refused";
inline const std::string command_failed = "command_failed";

struct StepOutcome {
  std::size_t step = 0;
  std::string label;  // step label, or a failure label
  bool ok = false;
  double start = 0.0;
  double end = 0.0;
  std::string detail;  // last output seen, open ports for scans
};

class Attacker {
 public:
  Attacker(AttackScript script, net::Network& net, devices::TruthSink truth);
  ~Attacker();
  Attacker(const Attacker&) = delete;
  Attacker& operator=(const Attacker&) = delete;

  /// Validates and schedules every step.
  void start();
  /// Closes out operations still pending at the end of the run.
  void finish();
  const std::vector<StepOutcome>& outcomes() const { return outcomes_; }
  const std::string& address() const { return address_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  AttackScript script_;
  net::Network& net_;
  devices::TruthSink truth_;
  std::string address_;
  std::vector<StepOutcome> outcomes_;
};

// ---- built-in scenarios ----

enum class TargetPath : std::uint8_t { rtu, hmi };

struct ScenarioParams {
  std::string attacker_host = "attacker";
  std::string pivot = "10.0.1.21";
  std::string mtu = "10.0.0.11";
  std::string hmi = "10.0.0.10";
  TargetPath target = TargetPath::rtu;
  double start = 120.0;
  double gap = 5.0;
  devices::Credentials credentials;
  std::vector<std::string> blacklist{"10.0.1.22"};
  std::size_t file_bytes = 4096;
  std::size_t chunk_bytes = 1024;
  std::string scan_range = "10.0.0.8-10.0.0.15";
  std::vector<std::uint16_t> scan_ports{23, 2404};
  int wrong_logins = 3;
  std::uint32_t unknown_ioa = 999;
  double spike_factor = 3.0;
  double slow_factor = 10.0;
  std::string exfil_file = "/var/log/scada.log";
};

struct Scenario {
  std::string name;
  AttackScript script;
  /// Flaw to arm on the pivot RTU for this scenario.
  devices::Vulnerability pivot_vulnerability = devices::Vulnerability::none;
};

const std::vector<std::string>& scenario_names();
/// Throws ConfigError for unknown names.
Scenario builtin_scenario(const std::string& name, const ScenarioParams& params = {});

TargetPath target_path_from(const std::string& s);
const char* to_string(TargetPath t);

}  // namespace scadatwin::attack
