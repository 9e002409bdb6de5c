#include "scadatwin/devices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "scadatwin/error.hpp"

namespace scadatwin::devices {

using net::SimTime;

const char* to_string(Role r) {
  switch (r) {
    case Role::hmi: return "hmi";
    case Role::mtu: return "mtu";
    case Role::rtu: return "rtu";
    case Role::ied: return "ied";
  }
  return "?";
}

Role role_from(const std::string& s) {
  if (s == "hmi") return Role::hmi;
  if (s == "mtu") return Role::mtu;
  if (s == "rtu") return Role::rtu;
  if (s == "ied") return Role::ied;
  throw Error(ErrorCode::ConfigError, "unknown device role '" + s + "'");
}

const char* to_string(Vulnerability v) {
  switch (v) {
    case Vulnerability::none: return "none";
    case Vulnerability::shutdown_on_unknown_ioa: return "shutdown_on_unknown_ioa";
    case Vulnerability::slowdown_on_unknown_ioa: return "slowdown_on_unknown_ioa";
  }
  return "?";
}

Vulnerability vulnerability_from(const std::string& s) {
  if (s == "none") return Vulnerability::none;
  if (s == "shutdown_on_unknown_ioa") return Vulnerability::shutdown_on_unknown_ioa;
  if (s == "slowdown_on_unknown_ioa") return Vulnerability::slowdown_on_unknown_ioa;
  throw Error(ErrorCode::ConfigError, "unknown vulnerability '" + s + "'");
}

// ---- data points ----

void DataPointMap::validate(const grid::GridModel& model) const {
  std::set<std::pair<std::string, std::uint32_t>> seen;
  for (const auto& dp : entries) {
    if (dp.ioa == 0 || dp.ioa > 0xFFFFFF)
      throw Error(ErrorCode::ConfigError, "IOA " + std::to_string(dp.ioa) + " out of range");
    if (!seen.insert({dp.rtu, dp.ioa}).second)
      throw Error(ErrorCode::ConfigError, "duplicate data point " + dp.rtu + "/" + std::to_string(dp.ioa));
    if (dp.direction == Direction::command) {
      const auto& a = model.asset(dp.asset);
      if (a.kind == grid::AssetKind::load)
        throw Error(ErrorCode::ConfigError, "setpoint command mapped to load '" + dp.asset + "'");
    } else if (dp.asset != lv_busbar_point && dp.asset != transformer_point) {
      model.asset(dp.asset);
    }
  }
}

const DataPoint* DataPointMap::find(const std::string& rtu, std::uint32_t ioa) const {
  for (const auto& dp : entries)
    if (dp.rtu == rtu && dp.ioa == ioa) return &dp;
  return nullptr;
}

const DataPoint* DataPointMap::command_for(const std::string& asset) const {
  for (const auto& dp : entries)
    if (dp.direction == Direction::command && dp.asset == asset) return &dp;
  return nullptr;
}

std::vector<DataPoint> DataPointMap::for_rtu(const std::string& rtu, Direction d) const {
  std::vector<DataPoint> out;
  for (const auto& dp : entries)
    if (dp.rtu == rtu && dp.direction == d) out.push_back(dp);
  return out;
}

// ---- tamper hook ----

TamperHook TamperHook::parse(const std::string& text) {
  TamperHook h;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto number = [&]() {
    try {
      std::size_t used = 0;
      double v = std::stod(arg, &used);
      if (used != arg.size() || !std::isfinite(v)) throw std::invalid_argument(arg);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad tamper hook argument '" + arg + "'");
    }
  };
  if (kind == "none" && arg.empty()) {
    h.kind = Kind::none;
  } else if (kind == "drop" && arg.empty()) {
    h.kind = Kind::drop;
  } else if (kind == "value_spike") {
    h.kind = Kind::value_spike;
    h.factor = number();
  } else if (kind == "replace_ioa") {
    h.kind = Kind::replace_ioa;
    const double v = number();
    if (v < 1 || v > 0xFFFFFF || v != std::floor(v)) throw Error(ErrorCode::ConfigError, "bad IOA '" + arg + "'");
    h.ioa = static_cast<std::uint32_t>(v);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown tamper hook '" + text + "'");
  }
  return h;
}

std::string TamperHook::to_string() const {
  char buf[64];
  switch (kind) {
    case Kind::none: return "none";
    case Kind::drop: return "drop";
    case Kind::value_spike: std::snprintf(buf, sizeof buf, "value_spike:%g", factor); return buf;
    case Kind::replace_ioa: return "replace_ioa:" + std::to_string(ioa);
  }
  return "none";
}

std::optional<Command> CommandPipeline::apply(const Command& cmd) const {
  Command out = cmd;
  switch (hook.kind) {
    case TamperHook::Kind::none: break;
    case TamperHook::Kind::value_spike: out.value *= hook.factor; break;
    case TamperHook::Kind::replace_ioa: out.ioa = hook.ioa; break;
    case TamperHook::Kind::drop: return std::nullopt;
  }
  return out;
}

// ---- plant and IEDs ----

Plant::Plant(grid::GridModel model, grid::Injections initial) : model_(std::move(model)) {
  model_.validate();
  for (const auto& a : model_.assets) injections_[a.id] = 0.0;
  for (const auto& [id, p] : initial) injections_[id] = grid::apply_setpoint(model_, id, p);
}

double Plant::set_injection(const std::string& asset_id, double p_target) {
  const double p = grid::apply_setpoint(model_, asset_id, p_target);
  injections_[asset_id] = p;
  return p;
}

const grid::GridState& Plant::solve(double t) {
  state_ = grid::solve_power_flow(model_, injections_, t);
  return state_;
}

double point_value(const grid::GridState& state, const std::string& point) {
  if (point == lv_busbar_point) return state.lv_busbar_p;
  if (point == transformer_point) return state.transformer_loading;
  auto it = state.asset_powers.find(point);
  if (it == state.asset_powers.end()) throw Error(ErrorCode::UnknownAsset, "no measured point '" + point + "'");
  return it->second;
}

std::vector<double> ied_measure(const grid::GridState& state, const std::vector<std::string>& points, net::Mode mode,
                                double noise_half_width, Rng& rng) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    double v = point_value(state, p);
    if (mode == net::Mode::lab && noise_half_width > 0) v += rng.uniform(-noise_half_width, noise_half_width);
    out.push_back(v);
  }
  return out;
}

// ---- device base ----

Device::Device(DeviceSpec spec, const net::HostSpec& host, Context& ctx)
    : spec_(std::move(spec)), host_(host), ctx_(ctx), rng_(ctx.net.config().seed, "device:" + host.id) {}

void Device::start() {
  if (spec_.telnet)
    ctx_.net.listen(address(), telnet_port,
                    [this](net::ConnId c, const net::Endpoint& peer) { return accept_telnet(c, peer); });
  ctx_.net.set_datagram_handler(address(), [this](const net::Frame& f) {
    after_delay([this, f] { on_probe(f); });
  });
}

SimTime Device::response_delay() {
  SimTime d = ctx_.timing.response_delay_ms;
  const SimTime j = ctx_.timing.response_jitter_ms;
  if (ctx_.net.config().mode == net::Mode::lab && j > 0) d = std::max<SimTime>(0, d + rng_.uniform_int(-j, j));
  return static_cast<SimTime>(std::llround(static_cast<double>(d) * slow_factor_));
}

void Device::after_delay(std::function<void()> action) {
  if (halted_) return;
  const SimTime at = std::max(ctx_.net.now() + response_delay(), busy_until_);
  busy_until_ = at;
  ctx_.net.events().schedule(at, [this, action = std::move(action)] {
    if (!halted_) action();
  });
}

std::optional<net::Frame> Device::send_i(Iec104Link& link, const iec104::Asdu& asdu) {
  if (!ctx_.net.is_open(link.conn)) return std::nullopt;
  Bytes b = iec104::encode_apdu(iec104::Apci::i_frame(link.send_seq, link.recv_seq), asdu);
  link.send_seq = iec104::next_seq(link.send_seq);
  link.unacked = 0;
  return ctx_.net.send(link.conn, address(), net::Protocol::iec104, std::move(b));
}

void Device::send_u(Iec104Link& link, iec104::UFunction f) {
  if (!ctx_.net.is_open(link.conn)) return;
  ctx_.net.send(link.conn, address(), net::Protocol::iec104, iec104::encode_apdu(iec104::Apci::u_frame(f), {}));
}

std::optional<iec104::Asdu> Device::receive_iec104(Iec104Link& link, const net::Frame& frame) {
  if (frame.protocol != net::Protocol::iec104) return std::nullopt;
  iec104::Apdu apdu;
  try {
    apdu = iec104::decode_apdu(frame.payload);
  } catch (const Error&) {
    return std::nullopt;
  }
  using iec104::FrameKind;
  using iec104::UFunction;
  switch (apdu.apci.kind) {
    case FrameKind::U:
      if (apdu.apci.u_function == UFunction::startdt_act) {
        link.started = true;
        send_u(link, UFunction::startdt_con);
      } else if (apdu.apci.u_function == UFunction::startdt_con) {
        link.started = true;
      } else if (apdu.apci.u_function == UFunction::testfr_act) {
        send_u(link, UFunction::testfr_con);
      }
      return std::nullopt;
    case FrameKind::S: return std::nullopt;
    case FrameKind::I: break;
  }
  link.recv_seq = iec104::next_seq(link.recv_seq);
  if (++link.unacked >= ctx_.timing.ack_window && ctx_.net.is_open(link.conn)) {
    ctx_.net.send(link.conn, address(), net::Protocol::iec104,
                  iec104::encode_apdu(iec104::Apci::s_frame(link.recv_seq), {}));
    link.unacked = 0;
  }
  return apdu.asdu;
}

std::optional<std::string> Device::role_command(const std::string&, const std::string&) { return std::nullopt; }

void Device::on_probe(const net::Frame& frame) {
  if (frame.protocol != net::Protocol::scan) return;
  scan::Message m;
  try {
    m = scan::decode(frame.payload);
  } catch (const Error&) {
    return;
  }
  if (m.kind != scan::Kind::probe) return;
  const scan::Kind answer = ctx_.net.has_listener(address(), m.port) ? scan::Kind::open : scan::Kind::refused;
  ctx_.net.send_datagram(address(), frame.src_addr, frame.dst_port, frame.src_port, net::Protocol::scan,
                         scan::encode({answer, m.port}));
}

// ---- remote shell ----

net::Network::Receiver Device::accept_telnet(net::ConnId conn, const net::Endpoint& peer) {
  TelnetSession s;
  s.conn = conn;
  s.peer = peer;
  sessions_[conn] = s;
  after_delay([this, conn] {
    auto it = sessions_.find(conn);
    if (it != sessions_.end()) reply(it->second, telnet::Kind::banner, host_id() + " login:");
  });
  return [this](net::ConnId c, const net::Frame& f) { after_delay([this, c, f] { on_telnet(c, f); }); };
}

void Device::reply(TelnetSession& s, telnet::Kind kind, const std::string& text) {
  if (!ctx_.net.is_open(s.conn)) return;
  ctx_.net.send(s.conn, address(), net::Protocol::telnet, telnet::encode({kind, text.substr(0, telnet::max_text)}));
}

void Device::on_telnet(net::ConnId conn, const net::Frame& frame) {
  auto it = sessions_.find(conn);
  if (it == sessions_.end()) return;
  TelnetSession& s = it->second;

  if (frame.protocol == net::Protocol::other) {
    if (to_text(frame.payload) != net::fin_payload) return;
    if (s.relay && ctx_.net.is_open(*s.relay)) ctx_.net.close(*s.relay, address());
    sessions_.erase(it);
    return;
  }
  if (s.stage == TelnetSession::Stage::relay) {
    if (s.relay && ctx_.net.is_open(*s.relay)) ctx_.net.send(*s.relay, address(), frame.protocol, frame.payload);
    return;
  }
  if (frame.protocol == net::Protocol::transfer) {
    if (s.stage != TelnetSession::Stage::receiving) return;
    transfer::Chunk chunk;
    try {
      chunk = transfer::decode(frame.payload);
    } catch (const Error&) {
      s.stage = TelnetSession::Stage::shell;
      reply(s, telnet::Kind::output, "recv: corrupt chunk");
      return;
    }
    if (chunk.file_name != s.recv_name || chunk.offset != s.recv_buffer.size()) {
      s.stage = TelnetSession::Stage::shell;
      reply(s, telnet::Kind::output, "recv: can't write '" + s.recv_name + "': bad offset");
      return;
    }
    s.recv_buffer.insert(s.recv_buffer.end(), chunk.data.begin(), chunk.data.end());
    if (chunk.last) {
      files()[s.recv_name] = to_text(s.recv_buffer);
      s.stage = TelnetSession::Stage::shell;
      reply(s, telnet::Kind::output,
            "received " + s.recv_name + " " + std::to_string(s.recv_buffer.size()) + " bytes");
      s.recv_buffer.clear();
    }
    return;
  }
  if (frame.protocol != net::Protocol::telnet) return;
  telnet::Message msg;
  try {
    msg = telnet::decode(frame.payload);
  } catch (const Error&) {
    return;
  }

  switch (s.stage) {
    case TelnetSession::Stage::username:
      if (msg.kind != telnet::Kind::username) return;
      s.user = msg.text;
      s.stage = TelnetSession::Stage::password;
      reply(s, telnet::Kind::banner, "Password:");
      return;
    case TelnetSession::Stage::password:
      if (msg.kind != telnet::Kind::password) return;
      if (s.user == spec_.credentials.username && msg.text == spec_.credentials.password) {
        s.stage = TelnetSession::Stage::shell;
        reply(s, telnet::Kind::banner, "Welcome to " + host_id());
      } else {
        ++failed_logins_;
        reply(s, telnet::Kind::banner, "Login incorrect");
        ctx_.net.close(conn, address());
        sessions_.erase(it);
      }
      return;
    case TelnetSession::Stage::shell:
      if (msg.kind == telnet::Kind::command) shell_command(s, msg.text);
      return;
    default: return;
  }
}

std::string Device::tail(const std::string& path) const {
  const std::string& text = spec_.files.at(path);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  const std::size_t from = lines.size() > 10 ? lines.size() - 10 : 0;
  std::string out;
  for (std::size_t i = from; i < lines.size(); ++i) out += lines[i] + "\n";
  return out;
}

void Device::shell_command(TelnetSession& s, const std::string& line) {
  ++executed_commands_;
  const auto sp = line.find(' ');
  const std::string verb = line.substr(0, sp);
  std::string args = sp == std::string::npos ? "" : line.substr(sp + 1);
  while (!args.empty() && args.back() == ' ') args.pop_back();

  if (verb == "exit") {
    const net::ConnId conn = s.conn;
    reply(s, telnet::Kind::output, "logout");
    ctx_.net.close(conn, address());
    sessions_.erase(conn);
    return;
  }
  if (verb == "tail" || verb == "cat") {
    if (!spec_.files.count(args)) {
      reply(s, telnet::Kind::output, verb + ": can't open '" + args + "': No such file or directory");
      return;
    }
    reply(s, telnet::Kind::output, verb == "tail" ? tail(args) : spec_.files.at(args));
    return;
  }
  if (verb == "ls") {
    std::string out;
    for (const auto& [name, _] : spec_.files) out += name + "\n";
    reply(s, telnet::Kind::output, out);
    return;
  }
  if (verb == "recv") {
    if (args.empty() || args.size() > transfer::max_name) {
      reply(s, telnet::Kind::output, "recv: missing file name");
      return;
    }
    s.stage = TelnetSession::Stage::receiving;
    s.recv_name = args;
    s.recv_buffer.clear();
    reply(s, telnet::Kind::output, "ready");
    return;
  }
  if (verb == "telnet") {
    const net::ConnId session_conn = s.conn;
    net::ConnId remote = 0;
    try {
      remote = ctx_.net.open_connection(address(), args, telnet_port, [this, session_conn](net::ConnId, const net::Frame& f) {
        after_delay([this, session_conn, f] { relay_to_peer(session_conn, f); });
      });
    } catch (const Error& e) {
      const char* why = e.code() == ErrorCode::Refused ? "Connection refused" : "No route to host";
      reply(s, telnet::Kind::output, "telnet: can't connect to remote host (" + args + "): " + why);
      return;
    }
    s.relay = remote;
    s.stage = TelnetSession::Stage::relay;
    return;
  }
  if (auto out = role_command(verb, args)) {
    reply(s, telnet::Kind::output, *out);
    return;
  }
  reply(s, telnet::Kind::output, "-sh: " + verb + ": not found");
}

void Device::relay_to_peer(net::ConnId session_conn, const net::Frame& frame) {
  auto it = sessions_.find(session_conn);
  if (it == sessions_.end()) return;
  TelnetSession& s = it->second;
  if (frame.protocol == net::Protocol::other) {
    if (to_text(frame.payload) != net::fin_payload) return;
    s.relay.reset();
    s.stage = TelnetSession::Stage::shell;
    reply(s, telnet::Kind::output, "Connection closed by foreign host.");
    return;
  }
  if (ctx_.net.is_open(session_conn)) ctx_.net.send(session_conn, address(), frame.protocol, frame.payload);
}

// ---- MTU ----

Mtu::Mtu(DeviceSpec spec, const net::HostSpec& host, Context& ctx, std::vector<const Rtu*> rtus)
    : Device(std::move(spec), host, ctx), rtus_(std::move(rtus)) {
  reload_hook();
}

void Mtu::reload_hook() {
  pipeline_.hook = {};
  auto f = spec_.files.find(command_file);
  if (f == spec_.files.end()) return;
  std::istringstream in(f->second);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("hook=", 0) == 0) pipeline_.hook = TamperHook::parse(line.substr(5));
}

void Mtu::start() {
  Device::start();
  if (!spec_.iec104) return;
  ctx_.net.listen(address(), iec104_port, [this](net::ConnId c, const net::Endpoint& peer) {
    const auto* h = ctx_.net.topology().host_by_address(peer.addr);
    hmi_link_ = Iec104Link{c, h ? h->id : peer.addr};
    return [this](net::ConnId conn, const net::Frame& f) { after_delay([this, conn, f] { on_hmi_frame(conn, f); }); };
  });
  for (const Rtu* rtu : rtus_) {
    const std::string id = rtu->host_id();
    try {
      const net::ConnId c = ctx_.net.open_connection(address(), rtu->address(), iec104_port,
                                                     [this, id](net::ConnId, const net::Frame& f) {
                                                       after_delay([this, id, f] { on_rtu_frame(id, f); });
                                                     });
      auto& link = rtu_links_[id] = Iec104Link{c, id};
      send_u(link, iec104::UFunction::startdt_act);
    } catch (const Error&) {
      // station unreachable; it simply never reports
    }
  }
}

void Mtu::on_step(SimTime t) {
  after_delay([this, t] { poll_cycle(t); });
}

std::vector<iec104::Apdu> Mtu::poll_cycle(SimTime now) {
  std::vector<iec104::Apdu> out;
  const double step = ctx_.net.config().step_s;
  auto rtu_for = [&](const std::string& id) -> const Rtu* {
    for (const Rtu* r : rtus_)
      if (r->host_id() == id) return r;
    return nullptr;
  };
  auto put = [&](const std::string& rtu, const iec104::Asdu& asdu) -> std::optional<net::Frame> {
    auto link = rtu_links_.find(rtu);
    if (link == rtu_links_.end()) return std::nullopt;
    const auto apci = iec104::Apci::i_frame(link->second.send_seq, link->second.recv_seq);
    auto f = send_i(link->second, asdu);
    if (f) out.push_back({apci, asdu});
    return f;
  };

  for (const auto& e : ctx_.schedule.due(net::to_seconds(now), step)) {
    const DataPoint* dp = ctx_.points.command_for(e.asset_id);
    if (!dp) continue;
    const Command cmd{dp->rtu, dp->ioa, e.p_target};
    const auto sent = pipeline_.apply(cmd);
    const Rtu* rtu = rtu_for(sent ? sent->rtu : cmd.rtu);
    const std::string rtu_addr = rtu ? rtu->address() : cmd.rtu;
    if (!sent) {
      if (!manipulation_recorded_ && ctx_.truth) {
        const double t = net::to_seconds(ctx_.net.now());
        ctx_.truth({"command_manipulation", t, t, {address(), rtu_addr}});
      }
      manipulation_recorded_ = true;
      continue;
    }
    iec104::Asdu asdu;
    asdu.type = iec104::TypeId::setpoint_float;
    asdu.cot = iec104::Cot::activation;
    asdu.common_address = rtu ? rtu->common_address() : 0;
    asdu.ioa = sent->ioa;
    asdu.value = static_cast<float>(sent->value);
    auto f = put(sent->rtu, asdu);
    // a spike hook fires once and then restores the handler
    if (f && pipeline_.hook.kind == TamperHook::Kind::value_spike && !(*sent == cmd)) {
      spec_.files[command_file] = "hook=none\n";
      reload_hook();
    }
    if (f && !(*sent == cmd) && !manipulation_recorded_) {
      manipulation_recorded_ = true;
      if (ctx_.truth)
        ctx_.truth({"command_manipulation", net::to_seconds(f->sent_at), net::to_seconds(f->delivered_at),
                    {address(), rtu_addr}});
    }
  }

  const SimTime gi = net::from_seconds(ctx_.timing.interrogation_interval_s);
  if (now == 0 || (gi > 0 && now % gi == 0)) {
    for (const Rtu* r : rtus_) {
      iec104::Asdu asdu;
      asdu.type = iec104::TypeId::interrogation;
      asdu.cot = iec104::Cot::activation;
      asdu.common_address = r->common_address();
      asdu.ioa = 0;
      put(r->host_id(), asdu);
    }
  }
  return out;
}

void Mtu::on_rtu_frame(const std::string& rtu, const net::Frame& frame) {
  auto link = rtu_links_.find(rtu);
  if (link == rtu_links_.end()) return;
  auto asdu = receive_iec104(link->second, frame);
  if (!asdu || asdu->type != iec104::TypeId::measured_float) return;
  received_.emplace_back(net::to_seconds(ctx_.net.now()), asdu->ioa);
  if (hmi_link_ && hmi_link_->started) send_i(*hmi_link_, *asdu);
}

void Mtu::on_hmi_frame(net::ConnId conn, const net::Frame& frame) {
  if (!hmi_link_ || hmi_link_->conn != conn) return;
  receive_iec104(*hmi_link_, frame);
}

std::optional<std::string> Mtu::role_command(const std::string& verb, const std::string& args) {
  if (verb != "install-tamper") return std::nullopt;
  try {
    TamperHook::parse(args);
  } catch (const Error&) {
    return "install-tamper: invalid hook '" + args + "'";
  }
  spec_.files[command_file] = "hook=" + args + "\n";
  reload_hook();
  return "tamper hook installed: " + pipeline_.hook.to_string();
}

// ---- RTU ----

Rtu::Rtu(DeviceSpec spec, const net::HostSpec& host, Context& ctx)
    : Device(std::move(spec), host, ctx), ied_rng_(ctx.net.config().seed, "ied:" + host.id) {}

void Rtu::start() {
  Device::start();
  if (!spec_.iec104) return;
  ctx_.net.listen(address(), iec104_port, [this](net::ConnId c, const net::Endpoint& peer) {
    const auto* h = ctx_.net.topology().host_by_address(peer.addr);
    master_ = Iec104Link{c, h ? h->id : peer.addr};
    return [this](net::ConnId, const net::Frame& f) { after_delay([this, f] { on_master_frame(f); }); };
  });
}

void Rtu::on_step(SimTime t) {
  last_step_ = t;
  if (halted()) return;
  if (is_slowed()) {
    const SimTime period = std::llround(static_cast<double>(ctx_.net.config().step_ms()) * slowdown());
    if (period > 0 && (t - slowed_since_) % period != 0) return;
  }
  after_delay([this] {
    if (!master_ || !master_->started) return;
    for (const auto& a : pending_terminations_) send_i(*master_, a);
    pending_terminations_.clear();
    send_measurements(iec104::Cot::spontaneous);
  });
}

void Rtu::send_measurements(iec104::Cot cot) {
  if (!master_ || !master_->started) return;
  const auto pts = ctx_.points.for_rtu(host_id(), Direction::measurement);
  std::vector<std::string> names;
  for (const auto& p : pts) names.push_back(p.asset);
  const auto values =
      ied_measure(ctx_.plant.state(), names, ctx_.net.config().mode, ctx_.timing.noise_half_width_kw, ied_rng_);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    iec104::Asdu a;
    a.type = iec104::TypeId::measured_float;
    a.cot = cot;
    a.common_address = common_address();
    a.ioa = pts[i].ioa;
    a.value = static_cast<float>(values[i]);
    if (send_i(*master_, a) && ctx_.measured) ctx_.measured(ctx_.net.now(), names[i], values[i]);
  }
}

void Rtu::on_master_frame(const net::Frame& frame) {
  if (!master_) return;
  auto asdu = receive_iec104(*master_, frame);
  if (!asdu || !master_->started) return;
  handle_asdu(*asdu);
}

std::vector<iec104::Asdu> Rtu::handle_asdu(const iec104::Asdu& asdu) {
  std::vector<iec104::Asdu> sent;
  if (halted()) return sent;
  auto respond = [&](iec104::Asdu a, iec104::Cot cot) {
    a.cot = cot;
    if (master_) send_i(*master_, a);
    sent.push_back(a);
  };
  const double now_s = net::to_seconds(ctx_.net.now());
  const double end_s = std::max(now_s, ctx_.net.config().duration_s);

  switch (asdu.type) {
    case iec104::TypeId::setpoint_float: {
      const DataPoint* dp = ctx_.points.find(host_id(), asdu.ioa);
      if (dp && dp->direction == Direction::command) {
        ctx_.plant.set_injection(dp->asset, asdu.value);
        respond(asdu, iec104::Cot::activation_con);
        auto term = asdu;
        term.cot = iec104::Cot::termination;
        pending_terminations_.push_back(term);
        break;
      }
      switch (spec_.vulnerability) {
        case Vulnerability::none: respond(asdu, iec104::Cot::unknown_ioa); break;
        case Vulnerability::shutdown_on_unknown_ioa:
          halt();
          for (const auto& c : ctx_.points.for_rtu(host_id(), Direction::command)) ctx_.plant.set_injection(c.asset, 0.0);
          if (ctx_.truth) ctx_.truth({"rtu_shutdown", now_s, end_s, {address()}});
          break;
        case Vulnerability::slowdown_on_unknown_ioa:
          if (!is_slowed()) {
            set_slowdown(spec_.slow_factor);
            slowed_since_ = last_step_;
            if (ctx_.truth) ctx_.truth({"rtu_slowdown", now_s, end_s, {address()}});
          }
          break;
      }
      break;
    }
    case iec104::TypeId::interrogation: {
      respond(asdu, iec104::Cot::activation_con);
      send_measurements(iec104::Cot::spontaneous);
      respond(asdu, iec104::Cot::termination);
      break;
    }
    case iec104::TypeId::measured_float: break;
  }
  return sent;
}

// ---- HMI ----

Hmi::Hmi(DeviceSpec spec, const net::HostSpec& host, Context& ctx, std::string mtu_address)
    : Device(std::move(spec), host, ctx), mtu_address_(std::move(mtu_address)) {}

void Hmi::start() {
  Device::start();
  if (!spec_.iec104) return;
  try {
    const net::ConnId c = ctx_.net.open_connection(address(), mtu_address_, iec104_port,
                                                   [this](net::ConnId, const net::Frame& f) {
                                                     after_delay([this, f] {
                                                       if (!link_) return;
                                                       if (receive_iec104(*link_, f)) ++received_;
                                                     });
                                                   });
    const auto* h = ctx_.net.topology().host_by_address(mtu_address_);
    link_ = Iec104Link{c, h ? h->id : mtu_address_};
    send_u(*link_, iec104::UFunction::startdt_act);
  } catch (const Error&) {
  }
}

std::optional<std::string> Hmi::role_command(const std::string& verb, const std::string& args) {
  const double now_s = net::to_seconds(ctx_.net.now());
  const double end_s = std::max(now_s, ctx_.net.config().duration_s);
  if (verb == "halt-hmi") {
    if (ctx_.truth && !halted()) ctx_.truth({"hmi_halt", now_s, end_s, {address()}});
    halt();
    return "hmi halted";
  }
  if (verb == "slow-hmi") {
    double k = spec_.slow_factor;
    if (!args.empty()) {
      try {
        k = std::stod(args);
      } catch (const std::exception&) {
        return "slow-hmi: invalid factor '" + args + "'";
      }
    }
    if (!(k >= 1.0)) return "slow-hmi: invalid factor '" + args + "'";
    if (ctx_.truth && slowdown() <= 1.0) ctx_.truth({"hmi_slowdown", now_s, end_s, {address()}});
    set_slowdown(k);
    return "hmi slowed";
  }
  return std::nullopt;
}

// ---- validation ----

void validate_devices(const std::vector<DeviceSpec>& specs, const net::Topology& topology) {
  int mtus = 0, hmis = 0;
  std::set<std::string> rtu_hosts, bound;
  for (const auto& d : specs) {
    if (!topology.host_by_id(d.host))
      throw Error(ErrorCode::ConfigError, std::string(to_string(d.role)) + " bound to unknown host '" + d.host + "'");
    if (d.role == Role::ied) continue;
    if (!bound.insert(d.host).second) throw Error(ErrorCode::ConfigError, "host '" + d.host + "' has two devices");
    if (d.role == Role::mtu) ++mtus;
    if (d.role == Role::hmi) ++hmis;
    if (d.role == Role::rtu) rtu_hosts.insert(d.host);
  }
  if (mtus != 1) throw Error(ErrorCode::ConfigError, "exactly one MTU is required");
  if (hmis != 1) throw Error(ErrorCode::ConfigError, "exactly one HMI is required");
  if (rtu_hosts.empty()) throw Error(ErrorCode::ConfigError, "at least one RTU is required");
  std::set<std::string> served;
  for (const auto& d : specs) {
    if (d.role != Role::ied) continue;
    if (!rtu_hosts.count(d.host)) throw Error(ErrorCode::ConfigError, "IED attached to non-RTU host '" + d.host + "'");
    served.insert(d.host);
  }
  for (const auto& r : rtu_hosts)
    if (!served.count(r)) throw Error(ErrorCode::ConfigError, "RTU '" + r + "' serves no IED");
}

}  // namespace scadatwin::devices
