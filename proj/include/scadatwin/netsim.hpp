#pragma once

// Deterministic discrete-event emulation of the process network.
//
// Time is kept in integer milliseconds. Events at equal timestamps run in
// (priority, insertion) order, which makes every run a pure function of its
// inputs and seed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "scadatwin/bytes.hpp"
#include "scadatwin/rng.hpp"

namespace scadatwin::net {

using SimTime = std::int64_t;  // milliseconds

inline SimTime from_seconds(double s) { return static_cast<SimTime>(std::llround(s * 1000.0)); }
inline double to_seconds(SimTime t) { return static_cast<double>(t) / 1000.0; }

enum class Protocol : std::uint8_t { iec104, telnet, transfer, scan, other };
const char* to_string(Protocol p);
Protocol protocol_from(const std::string& s);

enum class Mode : std::uint8_t { twin, lab };
const char* to_string(Mode m);
Mode mode_from(const std::string& s);

struct Frame {
  std::string src_addr;
  std::string dst_addr;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::other;
  Bytes payload;
  SimTime sent_at = 0;
  SimTime delivered_at = 0;
  std::uint64_t seq = 0;  // global scheduling order
};

struct HostSpec {
  std::string id;
  std::string address;
  std::string role;
};

/// Endpoints name hosts or switches by id.
struct LinkSpec {
  std::string a;
  std::string b;
  SimTime latency_ms = 1;
  SimTime jitter_ms = 0;  // uniform half-width, applied in lab mode only
};

struct TapSpec {
  std::string id;
  std::string a;  // link endpoints
  std::string b;
};

struct Topology {
  std::vector<HostSpec> hosts;
  std::vector<std::string> switches;
  std::vector<LinkSpec> links;
  std::vector<TapSpec> taps;

  /// Throws ConfigError on duplicate ids/addresses, dangling link endpoints,
  /// taps on missing links or a disconnected graph.
  void validate() const;
  const HostSpec* host_by_address(const std::string& addr) const;
  const HostSpec* host_by_id(const std::string& id) const;
};

struct SimConfig {
  double step_s = 1.0;
  double duration_s = 300.0;
  std::uint64_t seed = 42;
  Mode mode = Mode::twin;
  std::size_t mtu_bytes = 65535;

  void validate() const;
  SimTime step_ms() const { return from_seconds(step_s); }
  SimTime duration_ms() const { return from_seconds(duration_s); }
};

class EventQueue {
 public:
  using Action = std::function<void()>;

  /// Lower priority values run first among events sharing a timestamp.
  void schedule(SimTime at, Action action, int priority = 1);
  /// Runs every event with timestamp < end, in order.
  void run_until(SimTime end);
  SimTime now() const { return now_; }
  bool empty() const { return queue_.empty(); }

 private:
  struct Item {
    SimTime at;
    int priority;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Item& x, const Item& y) const {
      if (x.at != y.at) return x.at > y.at;
      if (x.priority != y.priority) return x.priority > y.priority;
      return x.seq > y.seq;
    }
  };
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  SimTime now_ = 0;
};

using ConnId = std::uint64_t;
enum class ConnState : std::uint8_t { connecting, open, closed };

struct Endpoint {
  std::string addr;
  std::uint16_t port = 0;
};

/// Payload bytes of the handshake and teardown frames (protocol `other`).
inline constexpr std::string_view syn_payload = "SYN";
inline constexpr std::string_view synack_payload = "SYN-ACK";
inline constexpr std::string_view ack_payload = "ACK";
inline constexpr std::string_view rst_payload = "RST";
inline constexpr std::string_view fin_payload = "FIN";

class Network {
 public:
  using Receiver = std::function<void(ConnId, const Frame&)>;
  /// Called when a client connects; returns the server-side receiver.
  using Acceptor = std::function<Receiver(ConnId, const Endpoint& peer)>;
  using DatagramHandler = std::function<void(const Frame&)>;

  Network(Topology topology, SimConfig config, EventQueue& events);

  void listen(const std::string& addr, std::uint16_t port, Acceptor acceptor);
  bool has_listener(const std::string& addr, std::uint16_t port) const;
  void set_datagram_handler(const std::string& addr, DatagramHandler handler);

  /// Three-frame handshake (request, accept, ack), then the connection is
  /// open. Throws Unreachable for unknown addresses, Refused (after a
  /// request/reset exchange on the wire) when nothing listens on the port.
  ConnId open_connection(const std::string& src_addr, const std::string& dst_addr, std::uint16_t dst_port,
                         Receiver client_receiver);

  /// Schedules in-order delivery to the peer. Throws ConnectionClosed.
  Frame send(ConnId conn, const std::string& from_addr, Protocol protocol, Bytes payload);
  void close(ConnId conn, const std::string& from_addr);
  ConnState state(ConnId conn) const;
  bool is_open(ConnId conn) const { return state(conn) == ConnState::open; }
  Endpoint local_endpoint(ConnId conn, const std::string& addr) const;
  Endpoint remote_endpoint(ConnId conn, const std::string& addr) const;

  /// Single-frame message outside any connection. Frames to unknown
  /// addresses travel to the sender's first switch and are dropped there.
  Frame send_datagram(const std::string& src_addr, const std::string& dst_addr, std::uint16_t src_port,
                      std::uint16_t dst_port, Protocol protocol, Bytes payload);

  /// Frames that traversed the tapped link, ordered by delivered_at, then
  /// sent_at, src_addr, scheduling order. Throws UnknownTap.
  std::vector<Frame> tap_capture(const std::string& tap_id) const;
  std::vector<std::string> tap_ids() const;

  const Topology& topology() const { return topology_; }
  const SimConfig& config() const { return config_; }
  EventQueue& events() { return events_; }
  SimTime now() const { return events_.now(); }

 private:
  struct Side {
    Endpoint ep;
    Receiver receiver;
    SimTime last_delivery = 0;
  };
  struct Connection {
    Side client;
    Side server;
    ConnState state = ConnState::connecting;
    SimTime ready_at = 0;
  };

  const std::vector<std::size_t>& path(const std::string& src_node, const std::string& dst_node);
  SimTime transit(const std::vector<std::size_t>& links);
  Frame emit(Frame f, const std::vector<std::size_t>& links);
  Connection& conn(ConnId id);
  const Connection& conn(ConnId id) const;
  std::uint16_t ephemeral_port(const std::string& addr);

  Topology topology_;
  SimConfig config_;
  EventQueue& events_;
  std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> adjacency_;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> path_cache_;
  std::vector<Rng> link_rng_;
  std::vector<std::vector<std::size_t>> link_taps_;
  std::vector<std::vector<Frame>> tap_frames_;
  std::map<std::pair<std::string, std::uint16_t>, Acceptor> listeners_;
  std::map<std::string, DatagramHandler> datagram_handlers_;
  std::map<std::string, std::uint16_t> next_port_;
  std::map<ConnId, Connection> conns_;
  ConnId next_conn_ = 1;
  std::uint64_t next_frame_seq_ = 0;
};

}  // namespace scadatwin::net
