#include "scadatwin/netsim.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "scadatwin/error.hpp"

namespace scadatwin::net {

const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::iec104: return "iec104";
    case Protocol::telnet: return "telnet";
    case Protocol::transfer: return "transfer";
    case Protocol::scan: return "scan";
    case Protocol::other: return "other";
  }
  return "other";
}

Protocol protocol_from(const std::string& s) {
  if (s == "iec104") return Protocol::iec104;
  if (s == "telnet") return Protocol::telnet;
  if (s == "transfer") return Protocol::transfer;
  if (s == "scan") return Protocol::scan;
  if (s == "other") return Protocol::other;
  throw Error(ErrorCode::Malformed, "unknown protocol tag '" + s + "'");
}

const char* to_string(Mode m) { return m == Mode::twin ? "twin" : "lab"; }

Mode mode_from(const std::string& s) {
  if (s == "twin") return Mode::twin;
  if (s == "lab") return Mode::lab;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + s + "' (expected twin|lab)");
}

void Topology::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::ConfigError, why); };
  std::set<std::string> nodes, addrs;
  for (const auto& h : hosts) {
    if (!nodes.insert(h.id).second) bad("duplicate node id '" + h.id + "'");
    if (!addrs.insert(h.address).second) bad("duplicate address '" + h.address + "'");
  }
  for (const auto& s : switches)
    if (!nodes.insert(s).second) bad("duplicate node id '" + s + "'");
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& l : links) {
    if (!nodes.count(l.a) || !nodes.count(l.b)) bad("link " + l.a + "-" + l.b + " references an unknown node");
    if (l.latency_ms < 0 || l.jitter_ms < 0) bad("link " + l.a + "-" + l.b + " has negative latency or jitter");
    adj[l.a].push_back(l.b);
    adj[l.b].push_back(l.a);
  }
  std::set<std::string> tap_ids;
  for (const auto& t : taps) {
    if (!tap_ids.insert(t.id).second) bad("duplicate tap id '" + t.id + "'");
    bool found = std::any_of(links.begin(), links.end(), [&](const LinkSpec& l) {
      return (l.a == t.a && l.b == t.b) || (l.a == t.b && l.b == t.a);
    });
    if (!found) bad("tap '" + t.id + "' is not on an existing link");
  }
  if (nodes.empty()) return;
  std::set<std::string> seen{*nodes.begin()};
  std::deque<std::string> todo{*nodes.begin()};
  while (!todo.empty()) {
    auto n = todo.front();
    todo.pop_front();
    for (const auto& m : adj[n])
      if (seen.insert(m).second) todo.push_back(m);
  }
  if (seen.size() != nodes.size()) bad("topology graph is not connected");
}

const HostSpec* Topology::host_by_address(const std::string& addr) const {
  for (const auto& h : hosts)
    if (h.address == addr) return &h;
  return nullptr;
}

const HostSpec* Topology::host_by_id(const std::string& id) const {
  for (const auto& h : hosts)
    if (h.id == id) return &h;
  return nullptr;
}

void SimConfig::validate() const {
  if (!(step_s > 0)) throw Error(ErrorCode::ConfigError, "grid step must be positive");
  if (!(duration_s > 0)) throw Error(ErrorCode::ConfigError, "duration must be positive");
  if (mtu_bytes == 0) throw Error(ErrorCode::ConfigError, "MTU must be positive");
}

void EventQueue::schedule(SimTime at, Action action, int priority) {
  if (at < now_) at = now_;
  queue_.push(Item{at, priority, next_seq_++, std::move(action)});
}

void EventQueue::run_until(SimTime end) {
  while (!queue_.empty() && queue_.top().at < end) {
    Item item = queue_.top();
    queue_.pop();
    now_ = item.at;
    item.action();
  }
  if (now_ < end) now_ = end;
}

Network::Network(Topology topology, SimConfig config, EventQueue& events)
    : topology_(std::move(topology)), config_(config), events_(events) {
  topology_.validate();
  config_.validate();
  link_taps_.resize(topology_.links.size());
  for (std::size_t i = 0; i < topology_.links.size(); ++i) {
    const auto& l = topology_.links[i];
    adjacency_[l.a].emplace_back(i, l.b);
    adjacency_[l.b].emplace_back(i, l.a);
    link_rng_.emplace_back(config_.seed, "link:" + l.a + "|" + l.b);
  }
  tap_frames_.resize(topology_.taps.size());
  for (std::size_t t = 0; t < topology_.taps.size(); ++t) {
    const auto& tap = topology_.taps[t];
    for (std::size_t i = 0; i < topology_.links.size(); ++i) {
      const auto& l = topology_.links[i];
      if ((l.a == tap.a && l.b == tap.b) || (l.a == tap.b && l.b == tap.a)) link_taps_[i].push_back(t);
    }
  }
}

const std::vector<std::size_t>& Network::path(const std::string& src, const std::string& dst) {
  auto key = std::make_pair(src, dst);
  auto cached = path_cache_.find(key);
  if (cached != path_cache_.end()) return cached->second;

  std::map<std::string, std::pair<std::string, std::size_t>> prev;
  std::deque<std::string> todo{src};
  prev[src] = {src, SIZE_MAX};
  while (!todo.empty() && !prev.count(dst)) {
    auto n = todo.front();
    todo.pop_front();
    for (const auto& [link, m] : adjacency_[n]) {
      // hosts never forward traffic for others
      if (m != dst && topology_.host_by_id(m)) continue;
      if (prev.emplace(m, std::make_pair(n, link)).second) todo.push_back(m);
    }
  }
  if (!prev.count(dst)) throw Error(ErrorCode::Unreachable, "no path from " + src + " to " + dst);
  std::vector<std::size_t> links;
  for (std::string cur = dst; cur != src; cur = prev[cur].first) links.push_back(prev[cur].second);
  std::reverse(links.begin(), links.end());
  return path_cache_[key] = std::move(links);
}

SimTime Network::transit(const std::vector<std::size_t>& links) {
  SimTime total = 0;
  for (std::size_t i : links) {
    const auto& l = topology_.links[i];
    total += l.latency_ms;
    if (config_.mode == Mode::lab && l.jitter_ms > 0) total += link_rng_[i].uniform_int(-l.jitter_ms, l.jitter_ms);
  }
  return std::max<SimTime>(total, 0);
}

Frame Network::emit(Frame f, const std::vector<std::size_t>& links) {
  if (f.payload.size() > config_.mtu_bytes) throw Error(ErrorCode::Malformed, "payload exceeds the configured MTU");
  f.seq = next_frame_seq_++;
  for (std::size_t i : links)
    for (std::size_t t : link_taps_[i]) tap_frames_[t].push_back(f);
  return f;
}

Network::Connection& Network::conn(ConnId id) {
  auto it = conns_.find(id);
  if (it == conns_.end()) throw Error(ErrorCode::ConnectionClosed, "unknown connection");
  return it->second;
}

const Network::Connection& Network::conn(ConnId id) const {
  auto it = conns_.find(id);
  if (it == conns_.end()) throw Error(ErrorCode::ConnectionClosed, "unknown connection");
  return it->second;
}

std::uint16_t Network::ephemeral_port(const std::string& addr) {
  auto [it, inserted] = next_port_.try_emplace(addr, 49152);
  std::uint16_t p = it->second;
  it->second = it->second == 65535 ? 49152 : static_cast<std::uint16_t>(it->second + 1);
  return p;
}

void Network::listen(const std::string& addr, std::uint16_t port, Acceptor acceptor) {
  if (!topology_.host_by_address(addr)) throw Error(ErrorCode::ConfigError, "listen on unknown address " + addr);
  listeners_[{addr, port}] = std::move(acceptor);
}

bool Network::has_listener(const std::string& addr, std::uint16_t port) const {
  return listeners_.count({addr, port}) > 0;
}

void Network::set_datagram_handler(const std::string& addr, DatagramHandler handler) {
  datagram_handlers_[addr] = std::move(handler);
}

ConnId Network::open_connection(const std::string& src_addr, const std::string& dst_addr, std::uint16_t dst_port,
                                Receiver client_receiver) {
  const HostSpec* src = topology_.host_by_address(src_addr);
  if (!src) throw Error(ErrorCode::ConfigError, "unknown source address " + src_addr);
  const HostSpec* dst = topology_.host_by_address(dst_addr);
  if (!dst) throw Error(ErrorCode::Unreachable, "no host with address " + dst_addr);
  const auto fwd = path(src->id, dst->id);
  const auto back = path(dst->id, src->id);
  const std::uint16_t sport = ephemeral_port(src_addr);
  const SimTime now = events_.now();

  auto frame = [&](bool from_client, std::string_view what, SimTime at, const std::vector<std::size_t>& links) {
    Frame f;
    f.src_addr = from_client ? src_addr : dst_addr;
    f.dst_addr = from_client ? dst_addr : src_addr;
    f.src_port = from_client ? sport : dst_port;
    f.dst_port = from_client ? dst_port : sport;
    f.protocol = Protocol::other;
    f.payload = to_bytes(what);
    f.sent_at = at;
    f.delivered_at = at + transit(links);
    return emit(std::move(f), links);
  };

  const Frame syn = frame(true, syn_payload, now, fwd);
  auto listener = listeners_.find({dst_addr, dst_port});
  if (listener == listeners_.end()) {
    frame(false, rst_payload, syn.delivered_at, back);
    throw Error(ErrorCode::Refused, "connection refused by " + dst_addr + ":" + std::to_string(dst_port));
  }
  const Frame synack = frame(false, synack_payload, syn.delivered_at, back);
  const Frame ack = frame(true, ack_payload, synack.delivered_at, fwd);

  const ConnId id = next_conn_++;
  Connection c;
  c.client = Side{{src_addr, sport}, std::move(client_receiver), ack.delivered_at};
  c.server = Side{{dst_addr, dst_port}, {}, ack.delivered_at};
  c.state = ConnState::open;
  c.ready_at = ack.delivered_at;
  conns_.emplace(id, std::move(c));
  conns_.at(id).server.receiver = listener->second(id, Endpoint{src_addr, sport});
  return id;
}

Frame Network::send(ConnId id, const std::string& from_addr, Protocol protocol, Bytes payload) {
  Connection& c = conn(id);
  if (c.state != ConnState::open) throw Error(ErrorCode::ConnectionClosed, "send on closed connection");
  const bool from_client = from_addr == c.client.ep.addr;
  if (!from_client && from_addr != c.server.ep.addr)
    throw Error(ErrorCode::ConfigError, from_addr + " is not an endpoint of this connection");
  Side& me = from_client ? c.client : c.server;
  Side& peer = from_client ? c.server : c.client;

  const auto links = path(topology_.host_by_address(me.ep.addr)->id, topology_.host_by_address(peer.ep.addr)->id);
  Frame f;
  f.src_addr = me.ep.addr;
  f.dst_addr = peer.ep.addr;
  f.src_port = me.ep.port;
  f.dst_port = peer.ep.port;
  f.protocol = protocol;
  f.payload = std::move(payload);
  f.sent_at = std::max(events_.now(), c.ready_at);
  // per-direction ordering: never overtake an earlier frame
  f.delivered_at = std::max(f.sent_at + transit(links), me.last_delivery);
  me.last_delivery = f.delivered_at;
  Frame out = emit(std::move(f), links);

  const bool to_server = from_client;
  events_.schedule(out.delivered_at, [this, id, to_server, out] {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    const Side& dst = to_server ? it->second.server : it->second.client;
    if (dst.receiver) dst.receiver(id, out);
  });
  return out;
}

void Network::close(ConnId id, const std::string& from_addr) {
  Connection& c = conn(id);
  if (c.state == ConnState::closed) return;
  send(id, from_addr, Protocol::other, to_bytes(fin_payload));
  c.state = ConnState::closed;
}

ConnState Network::state(ConnId id) const { return conn(id).state; }

Endpoint Network::local_endpoint(ConnId id, const std::string& addr) const {
  const Connection& c = conn(id);
  return addr == c.client.ep.addr ? c.client.ep : c.server.ep;
}

Endpoint Network::remote_endpoint(ConnId id, const std::string& addr) const {
  const Connection& c = conn(id);
  return addr == c.client.ep.addr ? c.server.ep : c.client.ep;
}

Frame Network::send_datagram(const std::string& src_addr, const std::string& dst_addr, std::uint16_t src_port,
                             std::uint16_t dst_port, Protocol protocol, Bytes payload) {
  const HostSpec* src = topology_.host_by_address(src_addr);
  if (!src) throw Error(ErrorCode::ConfigError, "unknown source address " + src_addr);
  const HostSpec* dst = topology_.host_by_address(dst_addr);

  std::vector<std::size_t> links;
  if (dst) {
    links = path(src->id, dst->id);
  } else {
    auto adj = adjacency_.find(src->id);
    if (adj == adjacency_.end() || adj->second.empty())
      throw Error(ErrorCode::Unreachable, "host " + src->id + " has no links");
    links.push_back(adj->second.front().first);
  }
  Frame f;
  f.src_addr = src_addr;
  f.dst_addr = dst_addr;
  f.src_port = src_port;
  f.dst_port = dst_port;
  f.protocol = protocol;
  f.payload = std::move(payload);
  f.sent_at = events_.now();
  f.delivered_at = f.sent_at + transit(links);
  Frame out = emit(std::move(f), links);
  if (dst) {
    events_.schedule(out.delivered_at, [this, out] {
      auto h = datagram_handlers_.find(out.dst_addr);
      if (h != datagram_handlers_.end() && h->second) h->second(out);
    });
  }
  return out;
}

std::vector<Frame> Network::tap_capture(const std::string& tap_id) const {
  for (std::size_t t = 0; t < topology_.taps.size(); ++t) {
    if (topology_.taps[t].id != tap_id) continue;
    std::vector<Frame> out = tap_frames_[t];
    std::stable_sort(out.begin(), out.end(), [](const Frame& a, const Frame& b) {
      if (a.delivered_at != b.delivered_at) return a.delivered_at < b.delivered_at;
      if (a.sent_at != b.sent_at) return a.sent_at < b.sent_at;
      if (a.src_addr != b.src_addr) return a.src_addr < b.src_addr;
      return a.seq < b.seq;
    });
    return out;
  }
  throw Error(ErrorCode::UnknownTap, "no tap '" + tap_id + "'");
}

std::vector<std::string> Network::tap_ids() const {
  std::vector<std::string> ids;
  for (const auto& t : topology_.taps) ids.push_back(t.id);
  return ids;
}

}  // namespace scadatwin::net
