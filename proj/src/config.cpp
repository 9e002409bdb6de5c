#include "scadatwin/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scadatwin/error.hpp"

namespace scadatwin::config {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string scada_log() {
  std::string s;
  for (int i = 1; i <= 20; ++i)
    s += "scada[311]: poll cycle " + std::to_string(i) + " completed, 5 points updated\n";
  return s;
}

}  // namespace

ScenarioConfig default_config(const std::string& scenario) {
  const auto& names = attack::scenario_names();
  if (std::find(names.begin(), names.end(), scenario) == names.end())
    throw Error(ErrorCode::ConfigError, "unknown scenario '" + scenario + "'");
  ScenarioConfig c;
  c.scenario = scenario;

  auto& t = c.topology;
  t.hosts = {{"hmi", "10.0.0.10", "hmi"},
             {"mtu", "10.0.0.11", "mtu"},
             {"rtu1", "10.0.1.21", "rtu"},
             {"rtu2", "10.0.1.22", "rtu"},
             {"attacker", "10.0.9.66", "attacker"}};
  t.switches = {"sw1", "sw2", "sw3", "sw4"};
  t.links = {{"hmi", "sw1", 1, 1},  {"mtu", "sw1", 1, 1},  {"sw1", "sw2", 1, 1},      {"sw2", "sw3", 1, 1},
             {"rtu1", "sw3", 1, 1}, {"rtu2", "sw3", 1, 1}, {"sw2", "sw4", 1, 1},      {"attacker", "sw4", 1, 1}};
  t.taps = {{"switch_mtu", "sw1", "mtu"}, {"attacker_switch", "attacker", "sw4"}};

  c.sim.step_s = 1.0;
  c.sim.duration_s = 300.0;
  c.sim.seed = 42;

  devices::DeviceSpec hmi;
  hmi.host = "hmi";
  hmi.role = devices::Role::hmi;
  hmi.files = {{"/var/log/hmi.log", "hmi[88]: display refreshed\n"}};
  devices::DeviceSpec mtu;
  mtu.host = "mtu";
  mtu.role = devices::Role::mtu;
  mtu.files = {{devices::command_file, "hook=none\n"}, {"/var/log/scada.log", scada_log()}};
  devices::DeviceSpec rtu1;
  rtu1.host = "rtu1";
  rtu1.role = devices::Role::rtu;
  rtu1.common_address = 1;
  rtu1.files = {{"/var/log/messages", "vrtu[42]: station 1 online\n"}};
  devices::DeviceSpec rtu2 = rtu1;
  rtu2.host = "rtu2";
  rtu2.common_address = 2;
  rtu2.files = {{"/var/log/messages", "vrtu[42]: station 2 online\n"}};
  devices::DeviceSpec ied1;
  ied1.host = "rtu1";
  ied1.role = devices::Role::ied;
  ied1.telnet = ied1.iec104 = false;
  devices::DeviceSpec ied2 = ied1;
  ied2.host = "rtu2";
  c.devices = {hmi, mtu, rtu1, rtu2, ied1, ied2};

  using devices::Direction;
  c.points.entries = {{"rtu1", 100, "bss", Direction::command},
                      {"rtu1", 200, "bss", Direction::measurement},
                      {"rtu1", 201, devices::lv_busbar_point, Direction::measurement},
                      {"rtu2", 110, "pv", Direction::command},
                      {"rtu2", 210, "pv", Direction::measurement},
                      {"rtu2", 211, "load", Direction::measurement},
                      {"rtu2", 212, devices::transformer_point, Direction::measurement}};

  auto& g = c.grid;
  g.base_mva = 1.0;
  g.slack_bus = "mv";
  g.buses = {{"mv", 20.0}, {"lv", 0.4}, {"feeder_end", 0.4}};
  g.branches = {{"trafo", "mv", "lv", 0.01, 0.04, grid::BranchKind::transformer, 400.0},
                {"feeder", "lv", "feeder_end", 0.05, 0.02, grid::BranchKind::line, 0.0}};
  g.assets = {{"bss", "lv", grid::AssetKind::bss, -60.0, 60.0},
              {"pv", "lv", grid::AssetKind::pv, 0.0, 30.0},
              {"load", "lv", grid::AssetKind::load, -100.0, 0.0}};
  c.initial_injections = {{"bss", 1.5}, {"pv", 15.0}, {"load", -40.0}};
  c.schedule.cadence = 30.0;
  c.cyclic = CyclicSchedule{"bss", {1.5, 2.0}, 30.0};
  return c;
}

// ---- materialization ----

sim::SimulationInput simulation_input(const ScenarioConfig& cfg, net::Mode mode, std::uint64_t seed, int repetition) {
  if (cfg.repetitions < 1) throw Error(ErrorCode::ConfigError, "repetitions must be at least 1");
  sim::SimulationInput in;
  in.scenario = cfg.scenario;
  in.repetition = repetition;
  in.topology = cfg.topology;
  in.sim = cfg.sim;
  in.sim.seed = seed;
  in.sim.mode = mode;
  in.devices = cfg.devices;
  in.points = cfg.points;
  in.grid = cfg.grid;
  in.initial_injections = cfg.initial_injections;
  in.schedule = cfg.schedule;
  if (cfg.cyclic) {
    auto generated = grid::cyclic_schedule(cfg.cyclic->asset, cfg.cyclic->values, cfg.cyclic->cadence, cfg.sim.duration_s);
    in.schedule.entries.insert(in.schedule.entries.end(), generated.entries.begin(), generated.entries.end());
    std::stable_sort(in.schedule.entries.begin(), in.schedule.entries.end(),
                     [](const grid::ScheduleEntry& a, const grid::ScheduleEntry& b) { return a.time < b.time; });
  }
  in.timing = cfg.timing;

  if (cfg.steps) {
    in.script.attacker_host = cfg.attack.attacker_host;
    in.script.blacklist = cfg.attack.blacklist;
    in.script.steps = *cfg.steps;
  } else {
    const auto scenario = attack::builtin_scenario(cfg.scenario, cfg.attack);
    in.script = scenario.script;
    if (scenario.pivot_vulnerability != devices::Vulnerability::none) {
      const auto* pivot = in.topology.host_by_address(cfg.attack.pivot);
      if (!pivot) throw Error(ErrorCode::ConfigError, "pivot address " + cfg.attack.pivot + " not in topology");
      bool armed = false;
      for (auto& d : in.devices)
        if (d.host == pivot->id && d.role == devices::Role::rtu) {
          d.vulnerability = scenario.pivot_vulnerability;
          d.slow_factor = cfg.attack.slow_factor;
          armed = true;
        }
      if (!armed) throw Error(ErrorCode::ConfigError, "pivot " + cfg.attack.pivot + " is not an RTU");
    }
  }
  in.validate();
  return in;
}

void ScenarioConfig::validate() const {
  simulation_input(*this, sim.mode, sim.seed, 0);
  ids.stat.validate(sim.step_s);
  for (const auto& r : ids.rules) r.validate();
  if (!(ids.tolerance_s >= 0)) throw Error(ErrorCode::ConfigError, "negative matching tolerance");
  spec_model(*this).validate();
}

ids::SpecModel spec_model(const ScenarioConfig& cfg) {
  ids::SpecModel m;
  std::map<std::string, const devices::DeviceSpec*> by_host;
  for (const auto& d : cfg.devices)
    if (d.role != devices::Role::ied) by_host[d.host] = &d;
  std::string mtu_addr, hmi_addr;
  std::vector<std::pair<std::string, const devices::DeviceSpec*>> rtus;
  for (const auto& h : cfg.topology.hosts) {
    auto d = by_host.find(h.id);
    if (d == by_host.end()) continue;
    m.allowed_addresses.insert(h.address);
    if (d->second->role == devices::Role::mtu) mtu_addr = h.address;
    if (d->second->role == devices::Role::hmi) hmi_addr = h.address;
    if (d->second->role == devices::Role::rtu) rtus.emplace_back(h.address, d->second);
  }
  m.allowed_addresses.insert(cfg.ids.extra_allowed_addresses.begin(), cfg.ids.extra_allowed_addresses.end());
  m.mtu_address = mtu_addr;
  if (!hmi_addr.empty() && !mtu_addr.empty()) m.allowed_pairs.insert({hmi_addr, mtu_addr, devices::iec104_port});

  std::set<std::string> scheduled;
  for (const auto& e : cfg.schedule.entries) scheduled.insert(e.asset_id);
  if (cfg.cyclic) scheduled.insert(cfg.cyclic->asset);

  for (const auto& [addr, spec] : rtus) {
    if (!mtu_addr.empty()) m.allowed_pairs.insert({mtu_addr, addr, devices::iec104_port});
    m.station_address[spec->common_address] = addr;
    auto& ioas = m.allowed_ioas[spec->common_address];
    for (const auto& p : cfg.points.entries) {
      if (p.rtu != spec->host) continue;
      ioas.insert(p.ioa);
      if (p.direction == devices::Direction::command && scheduled.count(p.asset))
        m.command_repertoire.insert({static_cast<std::uint8_t>(iec104::TypeId::setpoint_float), spec->common_address, p.ioa});
    }
  }
  m.keywords = cfg.ids.keywords;
  m.relax_isr = cfg.ids.relax_isr;
  m.cycle_gap_s = cfg.ids.cycle_gap_s;
  return m;
}

// ---- JSON ----

namespace {

ojson step_json(const attack::Step& s) {
  ojson j;
  j["at"] = s.at;
  j["label"] = s.label;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, attack::TelnetConnect>) {
          j["type"] = "telnet_connect";
          j["session"] = c.session;
          j["target"] = c.target;
          if (c.via) j["via"] = *c.via;
          j["credentials"] = {{"username", c.credentials.username}, {"password", c.credentials.password}};
        } else if constexpr (std::is_same_v<T, attack::ExecCommand>) {
          j["type"] = "exec";
          j["session"] = c.session;
          j["command"] = c.command;
        } else if constexpr (std::is_same_v<T, attack::TransferFile>) {
          j["type"] = "transfer";
          j["session"] = c.session;
          j["file_name"] = c.file_name;
          j["size_bytes"] = c.size_bytes;
          j["chunk_bytes"] = c.chunk_bytes;
          if (!c.content.empty()) j["content"] = c.content;
        } else if constexpr (std::is_same_v<T, attack::NetworkScan>) {
          j["type"] = "scan";
          j["addresses"] = c.addresses;
          j["ports"] = c.ports;
          j["probe_interval_ms"] = c.probe_interval_ms;
        } else {
          j["type"] = "ssh_connect";
          j["session"] = c.session;
          j["target"] = c.target;
        }
      },
      s.action);
  return j;
}

template <class T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

devices::Credentials read_credentials(const json& j, devices::Credentials c = {}) {
  read(j, "username", c.username);
  read(j, "password", c.password);
  return c;
}

attack::Step parse_step(const json& j) {
  attack::Step s;
  s.at = j.at("at").get<double>();
  s.label = j.value("label", std::string());
  const std::string type = j.at("type").get<std::string>();
  if (type == "telnet_connect") {
    attack::TelnetConnect c;
    c.session = j.at("session").get<std::string>();
    c.target = j.at("target").get<std::string>();
    if (j.contains("via")) c.via = j.at("via").get<std::string>();
    if (j.contains("credentials")) c.credentials = read_credentials(j.at("credentials"));
    s.action = c;
  } else if (type == "exec") {
    s.action = attack::ExecCommand{j.at("session").get<std::string>(), j.at("command").get<std::string>()};
  } else if (type == "transfer") {
    attack::TransferFile t;
    t.session = j.at("session").get<std::string>();
    t.file_name = j.at("file_name").get<std::string>();
    read(j, "size_bytes", t.size_bytes);
    read(j, "chunk_bytes", t.chunk_bytes);
    read(j, "content", t.content);
    s.action = t;
  } else if (type == "scan") {
    attack::NetworkScan sc;
    if (j.contains("range")) sc.addresses = attack::expand_range(j.at("range").get<std::string>());
    read(j, "addresses", sc.addresses);
    read(j, "ports", sc.ports);
    read(j, "probe_interval_ms", sc.probe_interval_ms);
    s.action = sc;
  } else if (type == "ssh_connect") {
    s.action = attack::SshConnect{j.value("session", std::string()), j.value("target", std::string())};
  } else {
    throw Error(ErrorCode::ConfigError, "unknown step type '" + type + "'");
  }
  if (s.label.empty()) s.label = type;
  return s;
}

ojson rule_json(const ids::SignatureRule& r) {
  ojson j;
  j["id"] = r.id;
  if (r.protocol) j["protocol"] = net::to_string(*r.protocol);
  if (r.port) j["port"] = *r.port;
  j["pattern_hex"] = to_hex(r.pattern);
  if (r.offset) j["offset"] = *r.offset;
  j["label"] = r.label;
  j["severity"] = ids::to_string(r.severity);
  return j;
}

ids::SignatureRule parse_rule(const json& j) {
  ids::SignatureRule r;
  r.id = j.at("id").get<std::string>();
  if (j.contains("protocol")) r.protocol = net::protocol_from(j.at("protocol").get<std::string>());
  if (j.contains("port")) r.port = j.at("port").get<std::uint16_t>();
  if (j.contains("pattern")) r.pattern = to_bytes(j.at("pattern").get<std::string>());
  if (j.contains("pattern_hex")) r.pattern = from_hex(j.at("pattern_hex").get<std::string>());
  if (j.contains("offset")) r.offset = j.at("offset").get<std::size_t>();
  r.label = j.at("label").get<std::string>();
  r.severity = ids::severity_from(j.value("severity", std::string("low")));
  return r;
}

}  // namespace

std::string to_json_text(const ScenarioConfig& c) {
  ojson j;
  j["scenario"] = c.scenario;
  j["repetitions"] = c.repetitions;
  j["sim"] = {{"step_s", c.sim.step_s},
              {"duration_s", c.sim.duration_s},
              {"seed", c.sim.seed},
              {"mode", net::to_string(c.sim.mode)},
              {"mtu_bytes", c.sim.mtu_bytes}};

  ojson topo;
  topo["hosts"] = ojson::array();
  for (const auto& h : c.topology.hosts) topo["hosts"].push_back({{"id", h.id}, {"address", h.address}, {"role", h.role}});
  topo["switches"] = c.topology.switches;
  topo["links"] = ojson::array();
  for (const auto& l : c.topology.links)
    topo["links"].push_back({{"a", l.a}, {"b", l.b}, {"latency_ms", l.latency_ms}, {"jitter_ms", l.jitter_ms}});
  topo["taps"] = ojson::array();
  for (const auto& t : c.topology.taps) topo["taps"].push_back({{"id", t.id}, {"a", t.a}, {"b", t.b}});
  j["topology"] = topo;

  j["devices"] = ojson::array();
  for (const auto& d : c.devices) {
    ojson dj;
    dj["host"] = d.host;
    dj["role"] = devices::to_string(d.role);
    dj["credentials"] = {{"username", d.credentials.username}, {"password", d.credentials.password}};
    ojson services = ojson::array();
    if (d.telnet) services.push_back("telnet");
    if (d.iec104) services.push_back("iec104");
    dj["services"] = services;
    dj["files"] = ojson::object();
    for (const auto& [path, content] : d.files) dj["files"][path] = content;
    dj["vulnerability"] = devices::to_string(d.vulnerability);
    dj["common_address"] = d.common_address;
    dj["slow_factor"] = d.slow_factor;
    j["devices"].push_back(dj);
  }

  j["data_points"] = ojson::array();
  for (const auto& p : c.points.entries)
    j["data_points"].push_back({{"rtu", p.rtu},
                                {"ioa", p.ioa},
                                {"asset", p.asset},
                                {"direction", p.direction == devices::Direction::command ? "command" : "measurement"}});

  ojson g;
  g["base_mva"] = c.grid.base_mva;
  g["slack_bus"] = c.grid.slack_bus;
  g["buses"] = ojson::array();
  for (const auto& b : c.grid.buses) g["buses"].push_back({{"id", b.id}, {"nominal_kv", b.nominal_kv}});
  g["branches"] = ojson::array();
  for (const auto& b : c.grid.branches)
    g["branches"].push_back({{"id", b.id},
                             {"from", b.from_bus},
                             {"to", b.to_bus},
                             {"r_ohm", b.resistance},
                             {"x_ohm", b.reactance},
                             {"kind", grid::to_string(b.kind)},
                             {"rating_kva", b.rating_kva}});
  g["assets"] = ojson::array();
  for (const auto& a : c.grid.assets)
    g["assets"].push_back(
        {{"id", a.id}, {"bus", a.bus}, {"kind", grid::to_string(a.kind)}, {"p_min", a.p_min}, {"p_max", a.p_max}});
  j["grid"] = g;

  j["initial_injections"] = ojson::object();
  for (const auto& [id, p] : c.initial_injections) j["initial_injections"][id] = p;

  ojson sched;
  sched["cadence"] = c.schedule.cadence;
  sched["entries"] = ojson::array();
  for (const auto& e : c.schedule.entries)
    sched["entries"].push_back({{"time", e.time}, {"asset", e.asset_id}, {"p_target", e.p_target}});
  if (c.cyclic)
    sched["cyclic"] = {{"asset", c.cyclic->asset}, {"values", c.cyclic->values}, {"cadence", c.cyclic->cadence}};
  j["schedule"] = sched;

  j["timing"] = {{"response_delay_ms", c.timing.response_delay_ms},
                 {"response_jitter_ms", c.timing.response_jitter_ms},
                 {"noise_half_width_kw", c.timing.noise_half_width_kw},
                 {"interrogation_interval_s", c.timing.interrogation_interval_s},
                 {"ack_window", c.timing.ack_window}};

  const auto& a = c.attack;
  ojson aj;
  aj["attacker_host"] = a.attacker_host;
  aj["pivot"] = a.pivot;
  aj["mtu"] = a.mtu;
  aj["hmi"] = a.hmi;
  aj["target"] = attack::to_string(a.target);
  aj["start"] = a.start;
  aj["gap"] = a.gap;
  aj["credentials"] = {{"username", a.credentials.username}, {"password", a.credentials.password}};
  aj["blacklist"] = a.blacklist;
  aj["file_bytes"] = a.file_bytes;
  aj["chunk_bytes"] = a.chunk_bytes;
  aj["scan_range"] = a.scan_range;
  aj["scan_ports"] = a.scan_ports;
  aj["wrong_logins"] = a.wrong_logins;
  aj["unknown_ioa"] = a.unknown_ioa;
  aj["spike_factor"] = a.spike_factor;
  aj["slow_factor"] = a.slow_factor;
  aj["exfil_file"] = a.exfil_file;
  if (c.steps) {
    aj["steps"] = ojson::array();
    for (const auto& s : *c.steps) aj["steps"].push_back(step_json(s));
  }
  j["attack"] = aj;

  ojson ij;
  ij["tolerance_s"] = c.ids.tolerance_s;
  ij["rules"] = ojson::array();
  for (const auto& r : c.ids.rules) ij["rules"].push_back(rule_json(r));
  ij["stat"] = {{"window_s", c.ids.stat.window_s},
                {"z_low", c.ids.stat.z_low},
                {"z_med", c.ids.stat.z_med},
                {"z_high", c.ids.stat.z_high},
                {"min_std", c.ids.stat.min_std}};
  ij["label_mapping"] = ojson::object();
  for (const auto& [label, truths] : c.ids.mapping) ij["label_mapping"][label] = truths;
  ij["keywords"] = c.ids.keywords;
  ij["relax_isr"] = c.ids.relax_isr;
  ij["cycle_gap_s"] = c.ids.cycle_gap_s;
  ij["extra_allowed_addresses"] = c.ids.extra_allowed_addresses;
  j["ids"] = ij;
  return j.dump(2) + "\n";
}

ScenarioConfig parse_config(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "configuration must be a JSON object");
    ScenarioConfig c = default_config(j.value("scenario", std::string("baseline")));
    read(j, "repetitions", c.repetitions);

    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      read(s, "step_s", c.sim.step_s);
      read(s, "duration_s", c.sim.duration_s);
      read(s, "seed", c.sim.seed);
      read(s, "mtu_bytes", c.sim.mtu_bytes);
      if (s.contains("mode")) c.sim.mode = net::mode_from(s.at("mode").get<std::string>());
    }

    if (j.contains("topology")) {
      const auto& t = j.at("topology");
      if (t.contains("hosts")) {
        c.topology.hosts.clear();
        for (const auto& h : t.at("hosts"))
          c.topology.hosts.push_back({h.at("id").get<std::string>(), h.at("address").get<std::string>(),
                                      h.value("role", std::string())});
      }
      read(t, "switches", c.topology.switches);
      if (t.contains("links")) {
        c.topology.links.clear();
        for (const auto& l : t.at("links"))
          c.topology.links.push_back({l.at("a").get<std::string>(), l.at("b").get<std::string>(),
                                      l.value("latency_ms", net::SimTime{1}), l.value("jitter_ms", net::SimTime{0})});
      }
      if (t.contains("taps")) {
        c.topology.taps.clear();
        for (const auto& tp : t.at("taps"))
          c.topology.taps.push_back(
              {tp.at("id").get<std::string>(), tp.at("a").get<std::string>(), tp.at("b").get<std::string>()});
      }
    }

    if (j.contains("devices")) {
      c.devices.clear();
      for (const auto& dj : j.at("devices")) {
        devices::DeviceSpec d;
        d.host = dj.at("host").get<std::string>();
        d.role = devices::role_from(dj.at("role").get<std::string>());
        if (dj.contains("credentials")) d.credentials = read_credentials(dj.at("credentials"));
        if (dj.contains("services")) {
          const auto services = dj.at("services").get<std::vector<std::string>>();
          for (const auto& s : services)
            if (s != "telnet" && s != "iec104") throw Error(ErrorCode::ConfigError, "unknown service '" + s + "'");
          d.telnet = std::find(services.begin(), services.end(), "telnet") != services.end();
          d.iec104 = std::find(services.begin(), services.end(), "iec104") != services.end();
        }
        read(dj, "files", d.files);
        if (dj.contains("vulnerability"))
          d.vulnerability = devices::vulnerability_from(dj.at("vulnerability").get<std::string>());
        read(dj, "common_address", d.common_address);
        read(dj, "slow_factor", d.slow_factor);
        c.devices.push_back(d);
      }
    }

    if (j.contains("data_points")) {
      c.points.entries.clear();
      for (const auto& p : j.at("data_points")) {
        const std::string dir = p.value("direction", std::string("measurement"));
        if (dir != "command" && dir != "measurement")
          throw Error(ErrorCode::ConfigError, "unknown data point direction '" + dir + "'");
        c.points.entries.push_back({p.at("rtu").get<std::string>(), p.at("ioa").get<std::uint32_t>(),
                                    p.at("asset").get<std::string>(),
                                    dir == "command" ? devices::Direction::command : devices::Direction::measurement});
      }
    }

    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      read(g, "base_mva", c.grid.base_mva);
      read(g, "slack_bus", c.grid.slack_bus);
      if (g.contains("buses")) {
        c.grid.buses.clear();
        for (const auto& b : g.at("buses"))
          c.grid.buses.push_back({b.at("id").get<std::string>(), b.at("nominal_kv").get<double>()});
      }
      if (g.contains("branches")) {
        c.grid.branches.clear();
        for (const auto& b : g.at("branches"))
          c.grid.branches.push_back({b.at("id").get<std::string>(), b.at("from").get<std::string>(),
                                     b.at("to").get<std::string>(), b.value("r_ohm", 0.0), b.value("x_ohm", 0.0),
                                     grid::branch_kind_from(b.value("kind", std::string("line"))),
                                     b.value("rating_kva", 0.0)});
      }
      if (g.contains("assets")) {
        c.grid.assets.clear();
        for (const auto& a : g.at("assets"))
          c.grid.assets.push_back({a.at("id").get<std::string>(), a.at("bus").get<std::string>(),
                                   grid::asset_kind_from(a.at("kind").get<std::string>()), a.value("p_min", 0.0),
                                   a.value("p_max", 0.0)});
      }
    }

    if (j.contains("initial_injections")) c.initial_injections = j.at("initial_injections").get<grid::Injections>();

    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      read(s, "cadence", c.schedule.cadence);
      c.schedule.entries.clear();
      if (s.contains("entries"))
        for (const auto& e : s.at("entries"))
          c.schedule.entries.push_back(
              {e.at("time").get<double>(), e.at("asset").get<std::string>(), e.at("p_target").get<double>()});
      c.cyclic.reset();
      if (s.contains("cyclic")) {
        const auto& cy = s.at("cyclic");
        c.cyclic = CyclicSchedule{cy.at("asset").get<std::string>(), cy.at("values").get<std::vector<double>>(),
                                  cy.value("cadence", c.schedule.cadence)};
      }
    }

    if (j.contains("timing")) {
      const auto& t = j.at("timing");
      read(t, "response_delay_ms", c.timing.response_delay_ms);
      read(t, "response_jitter_ms", c.timing.response_jitter_ms);
      read(t, "noise_half_width_kw", c.timing.noise_half_width_kw);
      read(t, "interrogation_interval_s", c.timing.interrogation_interval_s);
      read(t, "ack_window", c.timing.ack_window);
    }

    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      auto& p = c.attack;
      read(a, "attacker_host", p.attacker_host);
      read(a, "pivot", p.pivot);
      read(a, "mtu", p.mtu);
      read(a, "hmi", p.hmi);
      if (a.contains("target")) p.target = attack::target_path_from(a.at("target").get<std::string>());
      read(a, "start", p.start);
      read(a, "gap", p.gap);
      if (a.contains("credentials")) p.credentials = read_credentials(a.at("credentials"), p.credentials);
      read(a, "blacklist", p.blacklist);
      read(a, "file_bytes", p.file_bytes);
      read(a, "chunk_bytes", p.chunk_bytes);
      read(a, "scan_range", p.scan_range);
      read(a, "scan_ports", p.scan_ports);
      read(a, "wrong_logins", p.wrong_logins);
      read(a, "unknown_ioa", p.unknown_ioa);
      read(a, "spike_factor", p.spike_factor);
      read(a, "slow_factor", p.slow_factor);
      read(a, "exfil_file", p.exfil_file);
      if (a.contains("steps")) {
        std::vector<attack::Step> steps;
        for (const auto& s : a.at("steps")) steps.push_back(parse_step(s));
        c.steps = std::move(steps);
      }
    }

    if (j.contains("ids")) {
      const auto& i = j.at("ids");
      read(i, "tolerance_s", c.ids.tolerance_s);
      if (i.contains("rules")) {
        c.ids.rules.clear();
        for (const auto& r : i.at("rules")) c.ids.rules.push_back(parse_rule(r));
      }
      if (i.contains("stat")) {
        const auto& s = i.at("stat");
        read(s, "window_s", c.ids.stat.window_s);
        read(s, "z_low", c.ids.stat.z_low);
        read(s, "z_med", c.ids.stat.z_med);
        read(s, "z_high", c.ids.stat.z_high);
        read(s, "min_std", c.ids.stat.min_std);
      }
      if (i.contains("label_mapping")) c.ids.mapping = i.at("label_mapping").get<ids::LabelMapping>();
      read(i, "keywords", c.ids.keywords);
      read(i, "relax_isr", c.ids.relax_isr);
      read(i, "cycle_gap_s", c.ids.cycle_gap_s);
      read(i, "extra_allowed_addresses", c.ids.extra_allowed_addresses);
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad configuration: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Malformed) throw Error(ErrorCode::ConfigError, e.what());
    throw;
  }
}

ScenarioConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const ScenarioConfig& cfg, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << to_json_text(cfg);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

}  // namespace scadatwin::config
