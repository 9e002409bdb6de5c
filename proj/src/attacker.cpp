#include "scadatwin/attacker.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "scadatwin/error.hpp"
#include "scadatwin/protocol.hpp"

namespace scadatwin::attack {

using net::SimTime;

namespace {

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

bool starts_with(const std::string& s, std::string_view p) { return s.rfind(p, 0) == 0; }
bool ends_with(const std::string& s, std::string_view p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

bool output_failed(const std::string& out) {
  return starts_with(out, "-sh:") || out.find(": can't ") != std::string::npos ||
         out.find("invalid") != std::string::npos;
}

std::string generated_content(std::uint64_t seed, const std::string& name, std::size_t size) {
  static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  Rng rng(seed, "payload:" + name);
  std::string s;
  s.reserve(size);
  while (s.size() < size) {
    if (s.size() % 64 == 63)
      s.push_back('\n');
    else
      s.push_back(alphabet[rng.uniform_int(0, sizeof(alphabet) - 2)]);
  }
  return s;
}

}  // namespace

std::vector<std::string> expand_range(const std::string& range) {
  auto parse = [&](const std::string& a, unsigned (&o)[4]) {
    char tail = 0;
    if (std::sscanf(a.c_str(), "%u.%u.%u.%u%c", &o[0], &o[1], &o[2], &o[3], &tail) != 4 || o[0] > 255 ||
        o[1] > 255 || o[2] > 255 || o[3] > 255)
      throw Error(ErrorCode::ConfigError, "bad address '" + a + "'");
  };
  const auto dash = range.find('-');
  unsigned lo[4], hi[4];
  parse(range.substr(0, dash), lo);
  if (dash == std::string::npos) return {range};
  parse(range.substr(dash + 1), hi);
  if (lo[0] != hi[0] || lo[1] != hi[1] || lo[2] != hi[2] || hi[3] < lo[3])
    throw Error(ErrorCode::ConfigError, "bad address range '" + range + "'");
  std::vector<std::string> out;
  for (unsigned x = lo[3]; x <= hi[3]; ++x)
    out.push_back(std::to_string(lo[0]) + "." + std::to_string(lo[1]) + "." + std::to_string(lo[2]) + "." +
                  std::to_string(x));
  return out;
}

void AttackScript::validate(const net::Topology& topology) const {
  if (!topology.host_by_id(attacker_host))
    throw Error(ErrorCode::ConfigError, "attacker host '" + attacker_host + "' not in topology");
  const std::set<std::string> banned(blacklist.begin(), blacklist.end());
  auto check_addr = [&](const std::string& a) {
    if (banned.count(a)) throw Error(ErrorCode::BlacklistViolation, "script touches blacklisted address " + a);
  };
  std::set<std::string> sessions;
  auto need = [&](const std::string& s) {
    if (!sessions.count(s)) throw Error(ErrorCode::ScriptInvariantBroken, "session '" + s + "' used before it is opened");
  };
  double prev = 0.0;
  for (const auto& step : steps) {
    if (!(step.at >= prev)) throw Error(ErrorCode::ScriptInvariantBroken, "steps out of time order");
    prev = step.at;
    std::visit(overloaded{
                   [&](const TelnetConnect& c) {
                     check_addr(c.target);
                     if (c.via) need(*c.via);
                     if (c.session.empty() || !sessions.insert(c.session).second)
                       throw Error(ErrorCode::ScriptInvariantBroken, "session '" + c.session + "' opened twice");
                   },
                   [&](const ExecCommand& e) {
                     need(e.session);
                     if (starts_with(e.command, "telnet ")) check_addr(e.command.substr(7));
                   },
                   [&](const TransferFile& t) {
                     need(t.session);
                     if (t.chunk_bytes == 0 || t.chunk_bytes > transfer::max_data)
                       throw Error(ErrorCode::ConfigError, "transfer chunk size out of range");
                     if (t.file_name.empty() || t.file_name.size() > transfer::max_name)
                       throw Error(ErrorCode::ConfigError, "bad transfer file name");
                   },
                   [&](const NetworkScan& s) {
                     if (s.ports.empty() || s.addresses.empty())
                       throw Error(ErrorCode::ConfigError, "scan needs addresses and ports");
                     for (const auto& a : s.addresses) check_addr(a);
                   },
                   [&](const SshConnect&) {
                     throw Error(ErrorCode::Unimplemented, "ssh sessions are not supported");
                   },
               },
               step.action);
  }
}

// ---- engine ----

struct Attacker::Impl {
  enum class Kind { login, exec, transfer };
  struct Op {
    Kind kind = Kind::exec;
    std::size_t step = 0;
    std::string label;
    double start = 0.0;
    std::vector<std::string> subjects;
    std::string command;
    std::string file_name;
    Bytes data;
    std::size_t chunk = 1024;
  };
  struct Session {
    std::string name;
    std::string target;
    net::ConnId carrier = 0;
    std::optional<std::string> parent;
    devices::Credentials credentials;
    bool logged_in = false;
    bool dead = false;
    std::optional<Op> active;
    std::deque<Op> queue;
  };

  Attacker& self;
  std::map<std::string, Session> sessions;
  std::map<net::ConnId, std::vector<std::string>> stacks;
  std::set<std::string> open_ports;
  SimTime last_response = 0;

  explicit Impl(Attacker& a) : self(a) {}

  net::Network& net() { return self.net_; }
  double now() const { return net::to_seconds(self.net_.now()); }

  void record(std::size_t step, const std::string& label, bool ok, double start, double end,
              const std::vector<std::string>& subjects, const std::string& detail) {
    self.outcomes_.push_back({step, label, ok, start, end, detail});
    if (self.truth_) self.truth_({label, start, std::max(start, end), subjects});
  }

  void complete(Session& s, bool ok, const std::string& failure, const std::string& detail) {
    if (!s.active) return;
    Op op = std::move(*s.active);
    s.active.reset();
    record(op.step, ok ? op.label : failure, ok, op.start, now(), op.subjects, detail);
    if (!s.queue.empty()) {
      Op next = std::move(s.queue.front());
      s.queue.pop_front();
      begin(s, std::move(next));
    }
  }

  void send_text(Session& s, telnet::Kind kind, const std::string& text) {
    if (net().is_open(s.carrier))
      net().send(s.carrier, self.address_, net::Protocol::telnet, telnet::encode({kind, text}));
  }

  void begin(Session& s, Op op) {
    if (s.active && !s.dead) {
      s.queue.push_back(std::move(op));
      return;
    }
    if (s.dead || (!s.logged_in && op.kind != Kind::login)) {
      record(op.step, command_failed, false, now(), now(), op.subjects, "session not available");
      return;
    }
    s.active = std::move(op);
    Op& a = *s.active;
    if (a.kind == Kind::exec) send_text(s, telnet::Kind::command, a.command);
    if (a.kind == Kind::transfer) send_text(s, telnet::Kind::command, "recv " + a.file_name);
  }

  void pop(net::ConnId carrier, const std::string& name) {
    auto& st = stacks[carrier];
    if (!st.empty() && st.back() == name) st.pop_back();
  }

  void on_frame(net::ConnId conn, const net::Frame& f) {
    auto st = stacks.find(conn);
    if (st == stacks.end() || st->second.empty()) return;
    if (f.protocol == net::Protocol::other) {
      if (to_text(f.payload) != net::fin_payload) return;
      for (auto it = st->second.rbegin(); it != st->second.rend(); ++it) {
        Session& s = sessions.at(*it);
        s.dead = true;
        if (s.active) complete(s, false, s.active->kind == Kind::login ? login_failed : command_failed, "closed");
      }
      st->second.clear();
      return;
    }
    if (f.protocol != net::Protocol::telnet) return;
    telnet::Message m;
    try {
      m = telnet::decode(f.payload);
    } catch (const Error&) {
      return;
    }
    Session& s = sessions.at(st->second.back());

    if (s.parent && m.kind == telnet::Kind::output && starts_with(m.text, "Connection closed by foreign host")) {
      s.dead = true;
      pop(conn, s.name);
      if (s.active) complete(s, false, s.active->kind == Kind::login ? login_failed : command_failed, m.text);
      return;
    }
    if (!s.active) return;
    Op& op = *s.active;
    switch (op.kind) {
      case Kind::login:
        if (m.kind == telnet::Kind::banner) {
          if (ends_with(m.text, "login:")) {
            send_text(s, telnet::Kind::username, s.credentials.username);
          } else if (starts_with(m.text, "Password")) {
            send_text(s, telnet::Kind::password, s.credentials.password);
          } else if (starts_with(m.text, "Welcome")) {
            s.logged_in = true;
            complete(s, true, "", m.text);
          } else if (starts_with(m.text, "Login incorrect")) {
            s.dead = true;
            complete(s, false, login_failed, m.text);
          }
        } else if (m.kind == telnet::Kind::output && starts_with(m.text, "telnet:")) {
          s.dead = true;
          pop(conn, s.name);
          complete(s, false, connection_refused, m.text);
        }
        break;
      case Kind::exec:
        if (m.kind == telnet::Kind::output) complete(s, !output_failed(m.text), command_failed, m.text);
        break;
      case Kind::transfer:
        if (m.kind != telnet::Kind::output) break;
        if (m.text == "ready") {
          for (std::size_t off = 0; off < op.data.size() || off == 0; off += op.chunk) {
            transfer::Chunk c;
            c.file_name = op.file_name;
            c.offset = static_cast<std::uint32_t>(off);
            const std::size_t n = std::min(op.chunk, op.data.size() - off);
            c.data.assign(op.data.begin() + static_cast<std::ptrdiff_t>(off),
                          op.data.begin() + static_cast<std::ptrdiff_t>(off + n));
            c.last = off + n >= op.data.size();
            if (net().is_open(s.carrier))
              net().send(s.carrier, self.address_, net::Protocol::transfer, transfer::encode(c));
            if (c.last) break;
          }
        } else {
          complete(s, starts_with(m.text, "received"), command_failed, m.text);
        }
        break;
    }
  }

  std::vector<std::string> subjects_of(const Session& s) {
    std::vector<std::string> out{self.address_};
    std::vector<std::string> chain;
    for (const Session* p = &s; p; p = p->parent ? &sessions.at(*p->parent) : nullptr) chain.push_back(p->target);
    out.insert(out.end(), chain.rbegin(), chain.rend());
    return out;
  }

  void connect(std::size_t idx, const Step& step, const TelnetConnect& c) {
    Session s;
    s.name = c.session;
    s.target = c.target;
    s.parent = c.via;
    s.credentials = c.credentials;
    Op op;
    op.kind = Kind::login;
    op.step = idx;
    op.label = step.label;
    op.start = now();

    if (!c.via) {
      auto& slot = sessions[c.session] = std::move(s);
      op.subjects = subjects_of(slot);
      try {
        slot.carrier = net().open_connection(self.address_, c.target, devices::telnet_port,
                                             [this](net::ConnId id, const net::Frame& f) { on_frame(id, f); });
      } catch (const Error&) {
        slot.dead = true;
        record(idx, connection_refused, false, op.start, now(), op.subjects, "connect failed");
        return;
      }
      stacks[slot.carrier].push_back(slot.name);
      slot.active = std::move(op);
      return;
    }

    Session& parent = sessions.at(*c.via);
    if (parent.active || !parent.queue.empty()) {
      // hop once the parent shell is idle
      net().events().schedule(self.net_.now() + 100, [this, idx, &step, c] { connect(idx, step, c); });
      return;
    }
    s.carrier = parent.carrier;
    auto& slot = sessions[c.session] = std::move(s);
    op.subjects = subjects_of(slot);
    auto& st = stacks[slot.carrier];
    if (parent.dead || !parent.logged_in || st.empty() || st.back() != parent.name) {
      slot.dead = true;
      record(idx, command_failed, false, op.start, now(), op.subjects, "pivot session not available");
      return;
    }
    st.push_back(slot.name);
    slot.active = std::move(op);
    send_text(parent, telnet::Kind::command, "telnet " + c.target);
  }

  void scan(std::size_t idx, const Step& step, const NetworkScan& sc) {
    const SimTime t0 = self.net_.now();
    SimTime at = t0;
    std::uint16_t sport = 40000;
    for (const auto& addr : sc.addresses) {
      for (std::uint16_t port : sc.ports) {
        net().events().schedule(at, [this, addr, port, sport] {
          net().send_datagram(self.address_, addr, sport, port, net::Protocol::scan,
                              scan::encode({scan::Kind::probe, port}));
        });
        at += sc.probe_interval_ms;
        ++sport;
      }
    }
    const SimTime last_probe = at - sc.probe_interval_ms;
    std::vector<std::string> subjects{self.address_};
    subjects.insert(subjects.end(), sc.addresses.begin(), sc.addresses.end());
    net().events().schedule(last_probe + 200, [this, idx, label = step.label, t0, last_probe, subjects] {
      std::string detail;
      for (const auto& p : open_ports) detail += (detail.empty() ? "" : " ") + p;
      const SimTime end = std::max(last_probe, last_response);
      record(idx, label, true, net::to_seconds(t0), net::to_seconds(end), subjects, detail);
    });
  }

  void run_step(std::size_t idx) {
    const Step& step = self.script_.steps[idx];
    std::visit(overloaded{
                   [&](const TelnetConnect& c) { connect(idx, step, c); },
                   [&](const ExecCommand& e) {
                     Session& s = sessions.at(e.session);
                     Op op;
                     op.kind = Kind::exec;
                     op.step = idx;
                     op.label = step.label;
                     op.start = now();
                     op.subjects = subjects_of(s);
                     op.command = e.command;
                     begin(s, std::move(op));
                   },
                   [&](const TransferFile& t) {
                     Session& s = sessions.at(t.session);
                     Op op;
                     op.kind = Kind::transfer;
                     op.step = idx;
                     op.label = step.label;
                     op.start = now();
                     op.subjects = subjects_of(s);
                     op.file_name = t.file_name;
                     op.data = to_bytes(t.content.empty()
                                            ? generated_content(self.net_.config().seed, t.file_name, t.size_bytes)
                                            : t.content);
                     op.chunk = t.chunk_bytes;
                     begin(s, std::move(op));
                   },
                   [&](const NetworkScan& sc) { scan(idx, step, sc); },
                   [&](const SshConnect&) {},
               },
               step.action);
  }
};

Attacker::Attacker(AttackScript script, net::Network& net, devices::TruthSink truth)
    : impl_(std::make_unique<Impl>(*this)), script_(std::move(script)), net_(net), truth_(std::move(truth)) {}

Attacker::~Attacker() = default;

void Attacker::start() {
  script_.validate(net_.topology());
  address_ = net_.topology().host_by_id(script_.attacker_host)->address;
  net_.set_datagram_handler(address_, [this](const net::Frame& f) {
    if (f.protocol != net::Protocol::scan) return;
    try {
      const auto m = scan::decode(f.payload);
      impl_->last_response = std::max(impl_->last_response, f.delivered_at);
      if (m.kind == scan::Kind::open) impl_->open_ports.insert(f.src_addr + ":" + std::to_string(m.port));
    } catch (const Error&) {
    }
  });
  for (std::size_t i = 0; i < script_.steps.size(); ++i)
    net_.events().schedule(net::from_seconds(script_.steps[i].at), [this, i] { impl_->run_step(i); });
}

void Attacker::finish() {
  for (auto& [name, s] : impl_->sessions) {
    if (!s.active) continue;
    const auto& op = *s.active;
    impl_->record(op.step, op.label, false, op.start, impl_->now(), op.subjects, "incomplete");
    s.active.reset();
  }
}

// ---- scenarios ----

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"baseline",       "two_hop_manipulation", "two_hop_shutdown",
                                              "two_hop_slowdown", "exfiltration",       "recon"};
  return names;
}

TargetPath target_path_from(const std::string& s) {
  if (s == "rtu") return TargetPath::rtu;
  if (s == "hmi") return TargetPath::hmi;
  throw Error(ErrorCode::ConfigError, "unknown manipulation target '" + s + "'");
}

const char* to_string(TargetPath t) { return t == TargetPath::rtu ? "rtu" : "hmi"; }

Scenario builtin_scenario(const std::string& name, const ScenarioParams& p) {
  Scenario sc;
  sc.name = name;
  sc.script.attacker_host = p.attacker_host;
  sc.script.blacklist = p.blacklist;
  auto& steps = sc.script.steps;
  double t = p.start;
  auto next = [&]() {
    const double at = t;
    t += p.gap;
    return at;
  };
  auto scan_step = [&]() { steps.push_back({next(), "scan", NetworkScan{expand_range(p.scan_range), p.scan_ports, 10}}); };
  auto transfer_step = [&](const std::string& session, const std::string& file) {
    steps.push_back({next(), "file_transfer", TransferFile{session, file, p.file_bytes, p.chunk_bytes, {}}});
  };
  char spike[64];
  std::snprintf(spike, sizeof spike, "%g", p.spike_factor);

  if (name == "baseline") return sc;
  if (name == "recon") {
    scan_step();
    for (int i = 0; i < p.wrong_logins; ++i) {
      devices::Credentials wrong{p.credentials.username, "guess" + std::to_string(i + 1)};
      steps.push_back({next(), "telnet_login", TelnetConnect{"guess" + std::to_string(i + 1), p.mtu, std::nullopt, wrong}});
    }
    return sc;
  }
  if (name == "exfiltration") {
    scan_step();
    steps.push_back({next(), "telnet_login", TelnetConnect{"pivot", p.pivot, std::nullopt, p.credentials}});
    steps.push_back({next(), "telnet_login", TelnetConnect{"hop", p.mtu, std::string("pivot"), p.credentials}});
    steps.push_back({next(), "exfiltration", ExecCommand{"hop", "tail " + p.exfil_file}});
    steps.push_back({next(), "exfiltration", ExecCommand{"hop", "cat " + p.exfil_file}});
    return sc;
  }
  const bool manip = name == "two_hop_manipulation";
  const bool shut = name == "two_hop_shutdown";
  const bool slow = name == "two_hop_slowdown";
  if (!manip && !shut && !slow) throw Error(ErrorCode::ConfigError, "unknown scenario '" + name + "'");

  const bool via_hmi = p.target == TargetPath::hmi && !manip;
  scan_step();
  steps.push_back({next(), "telnet_login", TelnetConnect{"pivot", p.pivot, std::nullopt, p.credentials}});
  transfer_step("pivot", "/tmp/agent.bin");
  steps.push_back({next(), "telnet_login", TelnetConnect{"hop", via_hmi ? p.hmi : p.mtu, std::string("pivot"), p.credentials}});
  transfer_step("hop", "/tmp/handler.bin");
  if (via_hmi) {
    char k[64];
    std::snprintf(k, sizeof k, "%g", p.slow_factor);
    steps.push_back({next(), shut ? "hmi_halt" : "hmi_slowdown",
                     ExecCommand{"hop", shut ? std::string("halt-hmi") : "slow-hmi " + std::string(k)}});
    return sc;
  }
  const std::string hook = manip ? "value_spike:" + std::string(spike) : "replace_ioa:" + std::to_string(p.unknown_ioa);
  steps.push_back({next(), "tamper_install", ExecCommand{"hop", "install-tamper " + hook}});
  if (shut) sc.pivot_vulnerability = devices::Vulnerability::shutdown_on_unknown_ioa;
  if (slow) sc.pivot_vulnerability = devices::Vulnerability::slowdown_on_unknown_ioa;
  return sc;
}

}  // namespace scadatwin::attack
