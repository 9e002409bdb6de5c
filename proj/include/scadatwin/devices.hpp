#pragma once

// Virtual OT assets: HMI, MTU and vRTUs with their IEC-104 control logic,
// IED data-point mapping to the grid, remote-shell services with
// credentials, and injectable flaws.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scadatwin/netsim.hpp"
#include "scadatwin/powergrid.hpp"
#include "scadatwin/protocol.hpp"
#include "scadatwin/rng.hpp"
#include "scadatwin/truth.hpp"

namespace scadatwin::devices {

inline constexpr std::uint16_t telnet_port = 23;
inline constexpr std::uint16_t iec104_port = 2404;

enum class Role : std::uint8_t { hmi, mtu, rtu, ied };
enum class Vulnerability : std::uint8_t { none, shutdown_on_unknown_ioa, slowdown_on_unknown_ioa };

const char* to_string(Role r);
Role role_from(const std::string& s);
const char* to_string(Vulnerability v);
Vulnerability vulnerability_from(const std::string& s);

struct Credentials {
  std::string username = "admin";
  std::string password = "admin1234";
};

struct DeviceSpec {
  std::string host;  // topology host id (an IED names the RTU host it sits behind)
  Role role = Role::rtu;
  Credentials credentials;
  bool telnet = true;
  bool iec104 = true;
  std::map<std::string, std::string> files;
  Vulnerability vulnerability = Vulnerability::none;
  std::uint16_t common_address = 1;  // RTU station address
  double slow_factor = 10.0;
};

enum class Direction : std::uint8_t { measurement, command };

/// Measurement points name a grid asset or one of the monitored points
/// `lv_busbar` / `transformer`.
struct DataPoint {
  std::string rtu;  // host id
  std::uint32_t ioa = 0;
  std::string asset;
  Direction direction = Direction::measurement;
};

struct DataPointMap {
  std::vector<DataPoint> entries;

  /// (rtu, ioa) unique; commands only to bss/pv assets.
  void validate(const grid::GridModel& model) const;
  const DataPoint* find(const std::string& rtu, std::uint32_t ioa) const;
  const DataPoint* command_for(const std::string& asset) const;
  std::vector<DataPoint> for_rtu(const std::string& rtu, Direction d) const;
};

inline const std::string lv_busbar_point = "lv_busbar";
inline const std::string transformer_point = "transformer";

struct TamperHook {
  enum class Kind : std::uint8_t { none, value_spike, replace_ioa, drop };
  Kind kind = Kind::none;
  double factor = 1.0;
  std::uint32_t ioa = 0;

  /// "none", "value_spike:<factor>" (next command only), "replace_ioa:<ioa>",
  /// "drop".
  static TamperHook parse(const std::string& text);
  std::string to_string() const;
  friend bool operator==(const TamperHook&, const TamperHook&) = default;
};

struct Command {
  std::string rtu;
  std::uint32_t ioa = 0;
  double value = 0.0;
  friend bool operator==(const Command&, const Command&) = default;
};

class CommandPipeline {
 public:
  /// nullopt when the hook drops the command.
  std::optional<Command> apply(const Command& cmd) const;
  TamperHook hook;
};

/// Fixed timing and noise knobs. Jitter terms only apply in lab mode.
struct DeviceTiming {
  net::SimTime response_delay_ms = 5;
  net::SimTime response_jitter_ms = 3;
  double noise_half_width_kw = 0.5;
  double interrogation_interval_s = 300.0;  // 0 disables periodic GI; startup GI always runs
  int ack_window = 8;                       // I-frames per S-frame acknowledgement
};

inline const std::string command_file = "/opt/scada/command_handler.conf";

/// Controllable plant: effective injections plus the latest solved state.
class Plant {
 public:
  Plant(grid::GridModel model, grid::Injections initial);
  /// Clamps through apply_setpoint and returns the effective injection.
  double set_injection(const std::string& asset_id, double p_target);
  const grid::Injections& injections() const { return injections_; }
  const grid::GridState& solve(double t);
  const grid::GridState& state() const { return state_; }
  const grid::GridModel& model() const { return model_; }

 private:
  grid::GridModel model_;
  grid::Injections injections_;
  grid::GridState state_;
};

/// Reads one value per point from a solved state. In lab mode each value
/// gets zero-mean uniform noise of the given half-width.
std::vector<double> ied_measure(const grid::GridState& state, const std::vector<std::string>& points, net::Mode mode,
                                double noise_half_width, Rng& rng);
double point_value(const grid::GridState& state, const std::string& point);

using TruthSink = std::function<void(TruthEvent)>;

struct Context {
  net::Network& net;
  Plant& plant;
  const DataPointMap& points;
  const grid::SetpointSchedule& schedule;
  DeviceTiming timing;
  TruthSink truth;
  /// Every measurement an RTU reports: (time, point, kW).
  std::function<void(net::SimTime, const std::string&, double)> measured;
};

/// One endpoint's view of an IEC-104 connection: sequence counters and
/// S-frame acknowledgement bookkeeping.
struct Iec104Link {
  net::ConnId conn = 0;
  std::string peer;  // host id
  std::uint16_t send_seq = 0;
  std::uint16_t recv_seq = 0;
  int unacked = 0;
  bool started = false;
};

class Device;

/// Server side of one remote-shell connection.
struct TelnetSession {
  enum class Stage : std::uint8_t { username, password, shell, receiving, relay, closed };
  net::ConnId conn = 0;
  net::Endpoint peer;
  Stage stage = Stage::username;
  std::string user;
  std::string recv_name;
  Bytes recv_buffer;
  std::optional<net::ConnId> relay;
};

class Device {
 public:
  Device(DeviceSpec spec, const net::HostSpec& host, Context& ctx);
  virtual ~Device() = default;
  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  virtual void start();
  virtual void on_step(net::SimTime t) { (void)t; }

  const DeviceSpec& spec() const { return spec_; }
  const std::string& address() const { return host_.address; }
  const std::string& host_id() const { return host_.id; }
  std::map<std::string, std::string>& files() { return spec_.files; }
  bool halted() const { return halted_; }
  double slowdown() const { return slow_factor_; }
  int failed_logins() const { return failed_logins_; }
  int executed_commands() const { return executed_commands_; }

 protected:
  /// Runs `action` after the device's response delay, unless the device is
  /// halted by then.
  void after_delay(std::function<void()> action);
  net::SimTime response_delay();
  std::optional<net::Frame> send_i(Iec104Link& link, const iec104::Asdu& asdu);
  void send_u(Iec104Link& link, iec104::UFunction f);
  /// Decodes one IEC-104 frame, handles U/S frames, sequence counters and
  /// acknowledgements. Returns the ASDU of an I-frame.
  std::optional<iec104::Asdu> receive_iec104(Iec104Link& link, const net::Frame& frame);

  /// Shell command hook for role-specific commands. Returns nullopt when the
  /// command is not known to this role.
  virtual std::optional<std::string> role_command(const std::string& verb, const std::string& args);

  void halt() { halted_ = true; }
  void set_slowdown(double k) { slow_factor_ = k; }

  DeviceSpec spec_;
  net::HostSpec host_;
  Context& ctx_;
  Rng rng_;

 private:
  net::Network::Receiver accept_telnet(net::ConnId conn, const net::Endpoint& peer);
  void on_telnet(net::ConnId conn, const net::Frame& frame);
  void shell_command(TelnetSession& s, const std::string& line);
  void reply(TelnetSession& s, telnet::Kind kind, const std::string& text);
  void relay_to_peer(net::ConnId session_conn, const net::Frame& frame);
  void on_probe(const net::Frame& frame);
  std::string tail(const std::string& path) const;

  std::map<net::ConnId, TelnetSession> sessions_;
  bool halted_ = false;
  double slow_factor_ = 1.0;
  int failed_logins_ = 0;
  int executed_commands_ = 0;
  net::SimTime busy_until_ = 0;  // processing is sequential per device
};

class Rtu;
class Hmi;

class Mtu : public Device {
 public:
  Mtu(DeviceSpec spec, const net::HostSpec& host, Context& ctx, std::vector<const Rtu*> rtus);

  void start() override;
  void on_step(net::SimTime t) override;

  /// One control cycle: scheduled setpoints (through the tamper hook) and
  /// due general interrogations. Returns the APDUs put on the wire.
  std::vector<iec104::Apdu> poll_cycle(net::SimTime now);

  CommandPipeline& pipeline() { return pipeline_; }
  /// Re-reads the command-handling file and installs the hook it names.
  void reload_hook();
  const std::vector<std::pair<double, std::uint32_t>>& received_measurements() const { return received_; }

 protected:
  std::optional<std::string> role_command(const std::string& verb, const std::string& args) override;

 private:
  void on_rtu_frame(const std::string& rtu, const net::Frame& frame);
  void on_hmi_frame(net::ConnId conn, const net::Frame& frame);

  std::vector<const Rtu*> rtus_;
  std::map<std::string, Iec104Link> rtu_links_;  // by rtu host id
  std::optional<Iec104Link> hmi_link_;
  CommandPipeline pipeline_;
  bool manipulation_recorded_ = false;
  std::vector<std::pair<double, std::uint32_t>> received_;
};

class Rtu : public Device {
 public:
  Rtu(DeviceSpec spec, const net::HostSpec& host, Context& ctx);

  void start() override;
  void on_step(net::SimTime t) override;

  /// Processes one ASDU from the master. Returns the response ASDUs sent
  /// immediately (possibly none).
  std::vector<iec104::Asdu> handle_asdu(const iec104::Asdu& asdu);

  bool is_shutdown() const { return halted(); }
  bool is_slowed() const { return slowdown() > 1.0; }
  std::uint16_t common_address() const { return spec_.common_address; }

 private:
  void send_measurements(iec104::Cot cot);
  void on_master_frame(const net::Frame& frame);

  Rng ied_rng_;
  std::optional<Iec104Link> master_;
  std::vector<iec104::Asdu> pending_terminations_;
  net::SimTime slowed_since_ = 0;
  net::SimTime last_step_ = 0;
};

class Hmi : public Device {
 public:
  Hmi(DeviceSpec spec, const net::HostSpec& host, Context& ctx, std::string mtu_address);

  void start() override;
  std::size_t received_frames() const { return received_; }

 protected:
  std::optional<std::string> role_command(const std::string& verb, const std::string& args) override;

 private:
  std::string mtu_address_;
  std::optional<Iec104Link> link_;
  std::size_t received_ = 0;
};

/// Checks role cardinalities and host bindings.
void validate_devices(const std::vector<DeviceSpec>& specs, const net::Topology& topology);

}  // namespace scadatwin::devices
