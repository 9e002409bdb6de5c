#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scadatwin/capture.hpp"
#include "scadatwin/config.hpp"
#include "scadatwin/error.hpp"
#include "scadatwin/harness.hpp"
#include "scadatwin/powergrid.hpp"
#include "scadatwin/protocol.hpp"
#include "scadatwin/rng.hpp"

using namespace scadatwin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

const fs::path work = fs::temp_directory_path() / "scadatwin_acceptance";
constexpr std::uint64_t seed = 42;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const std::vector<std::string> attack_scenarios{"recon", "exfiltration", "two_hop_manipulation", "two_hop_shutdown",
                                               "two_hop_slowdown"};

std::size_t count_label(const std::vector<ids::Alert>& alerts, const std::string& label) {
  return static_cast<std::size_t>(
      std::count_if(alerts.begin(), alerts.end(), [&](const ids::Alert& a) { return a.label == label; }));
}

const TruthEvent* first_truth(const harness::RunResult& r, const std::string& label) {
  for (const auto& e : r.outputs.truth)
    if (e.label == label) return &e;
  return nullptr;
}

std::optional<double> recall(const harness::RunResult& r, const std::string& detector, const std::string& label) {
  const auto* row = r.metrics.find(detector, label);
  return row ? row->recall() : std::nullopt;
}

// 1
Outcome determinism() {
  Outcome o;
  double slowest = 0;
  for (const auto& name : attack::scenario_names()) {
    const auto cfg = config::default_config(name);
    for (auto mode : {net::Mode::twin, net::Mode::lab}) {
      const fs::path a = work / "det" / name / net::to_string(mode) / "a";
      const fs::path b = work / "det" / name / net::to_string(mode) / "b";
      for (const auto& dir : {a, b}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = harness::execute(cfg, mode, seed);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        slowest = std::max(slowest, wall);
        o.require(wall < 10.0, name + " took " + fmt(wall) + " s");
        harness::write_result(r, cfg, dir);
      }
      std::size_t files = 0;
      for (const auto& entry : fs::directory_iterator(a)) {
        const auto f = entry.path().filename();
        ++files;
        o.require(fs::exists(b / f) && slurp(a / f) == slurp(b / f),
                  name + "/" + net::to_string(mode) + ": " + f.string() + " differs");
      }
      o.require(files >= 9, name + ": missing run files");
    }
  }
  if (o.pass) o.detail = "12 scenario/mode pairs byte-identical, slowest run " + fmt(slowest) + " s";
  return o;
}

// 2
Outcome codec() {
  using namespace iec104;
  Outcome o;
  const Bytes startdt = encode_apdu(Apci::u_frame(UFunction::startdt_act), std::nullopt);
  o.require(startdt == Bytes{0x68, 0x04, 0x07, 0x00, 0x00, 0x00}, "startdt_act encoding");
  Rng rng(seed, "acceptance-codec");
  const TypeId types[] = {TypeId::measured_float, TypeId::setpoint_float, TypeId::interrogation};
  const Cot cots[] = {Cot::spontaneous, Cot::activation, Cot::activation_con, Cot::termination, Cot::unknown_ioa};
  const UFunction ufs[] = {UFunction::startdt_act, UFunction::startdt_con, UFunction::testfr_act,
                           UFunction::testfr_con};
  int ok = 0;
  for (int i = 0; i < 10000; ++i) {
    Apdu a;
    switch (rng.uniform_int(0, 2)) {
      case 0: {
        a.apci = Apci::i_frame(static_cast<std::uint16_t>(rng.uniform_int(0, 32767)),
                               static_cast<std::uint16_t>(rng.uniform_int(0, 32767)));
        Asdu s;
        s.type = types[rng.uniform_int(0, 2)];
        s.cot = cots[rng.uniform_int(0, 4)];
        s.common_address = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
        s.ioa = static_cast<std::uint32_t>(rng.uniform_int(0, (1 << 24) - 1));
        if (s.type == TypeId::interrogation)
          s.qualifier = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        else
          s.value = static_cast<float>(rng.uniform(-1e6, 1e6));
        a.asdu = s;
        break;
      }
      case 1:
        a.apci = Apci::s_frame(static_cast<std::uint16_t>(rng.uniform_int(0, 32767)));
        break;
      default:
        a.apci = Apci::u_frame(ufs[rng.uniform_int(0, 3)]);
    }
    ok += decode_apdu(encode_apdu(a)) == a;
  }
  o.require(ok == 10000, std::to_string(10000 - ok) + " round-trip mismatches");
  if (o.pass) o.detail = "10000/10000 round-trips, startdt_act = 68 04 07 00 00 00";
  return o;
}

// 3
Outcome power_flow() {
  using namespace grid;
  Outcome o;
  Rng rng(seed, "acceptance-two-bus");
  int feasible = 0, infeasible = 0;
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double kv = rng.uniform01() < 0.5 ? 0.4 : 20.0;
    const double r = rng.uniform(0.01, 0.5) * (kv > 1 ? 100.0 : 1.0);
    const double v0 = kv * 1000.0;
    const double ratio = i % 4 == 3 ? rng.uniform(1.1, 3.0) : rng.uniform(0.0, 0.6);
    const double p_w = ratio * v0 * v0 / (4.0 * r);
    GridModel m;
    m.buses = {{"src", kv}, {"load_bus", kv}};
    m.slack_bus = "src";
    m.branches = {{"line", "src", "load_bus", r, 0.0, BranchKind::line, 0.0}};
    m.assets = {{"load", "load_bus", AssetKind::load, -1e12, 0.0}};
    const Injections inj{{"load", -p_w / 1000.0}};
    // V (V0 - V) / R = P, high-voltage root
    const double disc = v0 * v0 - 4.0 * r * p_w;
    if (disc < 0) {
      ++infeasible;
      bool raised = false;
      try {
        solve_power_flow(m, inj);
      } catch (const Error& e) {
        raised = e.code() == ErrorCode::NoConvergence;
      }
      o.require(raised, "infeasible instance " + std::to_string(i) + " did not raise NoConvergence");
      continue;
    }
    ++feasible;
    const double expected = (v0 + std::sqrt(disc)) / 2.0 / v0;
    const double err = std::abs(solve_power_flow(m, inj).bus_voltages.at("load_bus").magnitude - expected);
    worst = std::max(worst, err);
    o.require(err < 1e-6, "instance " + std::to_string(i) + " off by " + fmt(err) + " p.u.");
  }
  if (o.pass)
    o.detail = std::to_string(feasible) + " feasible within " + fmt(worst) + " p.u., " + std::to_string(infeasible) +
               " infeasible raised NoConvergence";
  return o;
}

// 4
Outcome baseline_clean() {
  Outcome o;
  const auto cfg = config::default_config("baseline");
  std::string isr_counts;
  for (auto mode : {net::Mode::twin, net::Mode::lab}) {
    const std::string m = net::to_string(mode);
    const auto r = harness::execute(cfg, mode, seed);
    const auto& sig = r.alerts.at(ids::Detector::signature);
    const auto& spec = r.alerts.at(ids::Detector::spec);
    std::size_t stat_medium = 0;
    for (const auto& a : r.alerts.at(ids::Detector::stat))
      stat_medium += a.t >= cfg.ids.stat.window_s && a.severity != ids::Severity::low;
    const std::size_t isr = count_label(spec, "ISR");
    o.require(sig.empty(), m + ": " + std::to_string(sig.size()) + " signature alerts");
    for (const char* l : {"IPM", "NSC", "UIOA"})
      o.require(count_label(spec, l) == 0, m + ": " + std::to_string(count_label(spec, l)) + " " + l + " alerts");
    o.require(stat_medium == 0, m + ": " + std::to_string(stat_medium) + " statistical alerts of severity >= medium");
    o.require(cfg.timing.interrogation_interval_s > 0 && isr >= 1, m + ": no ISR alert with interrogation enabled");
    isr_counts += (isr_counts.empty() ? "" : ", ") + m + " " + std::to_string(isr);
  }
  if (o.pass) o.detail = "twin and lab: 0 signature, 0 IPM/NSC/UIOA, 0 stat >= medium; ISR " + isr_counts;
  return o;
}

// 5
Outcome p1_completeness() {
  Outcome o;
  std::string counts;
  for (const auto& name : attack_scenarios) {
    const auto r = harness::execute(config::default_config(name), net::Mode::twin, seed);
    const auto merged = capture::merge_captures(r.outputs.captures);
    const auto telnet = static_cast<std::size_t>(std::count_if(
        merged.begin(), merged.end(), [](const auto& c) { return c.protocol == net::Protocol::telnet; }));
    const auto p1 = count_label(r.alerts.at(ids::Detector::spec), "P1");
    o.require(telnet > 0 && p1 == telnet, name + ": P1 " + std::to_string(p1) + " vs telnet " + std::to_string(telnet));
    counts += (counts.empty() ? "" : ", ") + name + " " + std::to_string(p1);
  }
  if (o.pass) o.detail = "P1 = telnet frames: " + counts;
  return o;
}

// frames the targeted RTU emits before and after `at`
std::pair<std::size_t, std::size_t> rtu_frames(const harness::RunResult& r, const std::string& rtu, double at) {
  std::size_t before = 0, after = 0;
  for (const auto& c : capture::merge_captures(r.outputs.captures)) {
    if (c.src_addr() != rtu) continue;
    (c.seconds() < at ? before : after) += 1;
  }
  return {before, after};
}

// 6
Outcome attack_effects() {
  Outcome o;
  std::string detail;
  {
    const auto cfg = config::default_config("two_hop_shutdown");
    const auto r = harness::execute(cfg, net::Mode::twin, seed);
    const auto* e = first_truth(r, "rtu_shutdown");
    o.require(e != nullptr, "shutdown: no rtu_shutdown truth event");
    if (e) {
      const auto [before, after] = rtu_frames(r, cfg.attack.pivot, e->start);
      o.require(before > 0 && after == 0, "shutdown: " + std::to_string(after) + " RTU frames after the attack");
      detail += "shutdown 0 frames/s after t=" + fmt(e->start) + "; ";
    }
  }
  {
    const auto cfg = config::default_config("two_hop_slowdown");
    const auto r = harness::execute(cfg, net::Mode::twin, seed);
    const auto in = config::simulation_input(cfg, net::Mode::twin, seed);
    double slow_factor = 0;
    for (const auto& d : in.devices)
      if (d.role == devices::Role::rtu && d.vulnerability == devices::Vulnerability::slowdown_on_unknown_ioa)
        slow_factor = d.slow_factor;
    const auto* e = first_truth(r, "rtu_slowdown");
    o.require(e != nullptr && slow_factor > 1, "slowdown: no slowed RTU");
    if (e) {
      const auto [before, after] = rtu_frames(r, cfg.attack.pivot, e->start);
      const double pre = static_cast<double>(before) / e->start;
      const double post = static_cast<double>(after) / (cfg.sim.duration_s - e->start);
      const double bound = pre / slow_factor * 1.1;
      o.require(pre > 0 && post <= bound, "slowdown: " + fmt(post) + " frames/s after vs bound " + fmt(bound));
      detail += "slowdown " + fmt(pre) + " -> " + fmt(post) + " frames/s (bound " + fmt(bound) + "); ";
    }
  }
  {
    const auto cfg = config::default_config("two_hop_manipulation");
    const auto r = harness::execute(cfg, net::Mode::twin, seed);
    std::size_t inside = 0, windows = 0;
    for (const auto& e : r.outputs.truth) {
      if (e.label != "command_manipulation") continue;
      ++windows;
      for (const auto& a : r.alerts.at(ids::Detector::stat))
        inside += a.label == "STAT_POWER" && ids::alert_matches(a, e, cfg.ids.tolerance_s, cfg.ids.mapping);
    }
    const auto rec = recall(r, "stat", "truth:command_manipulation");
    o.require(windows > 0 && inside >= 1, "manipulation: no STAT_POWER alert in the manipulation window");
    o.require(cfg.ids.tolerance_s == 2.0 && rec && *rec == 1.0,
              "manipulation: recall " + (rec ? fmt(*rec) : std::string("n/a")));
    detail += "manipulation " + std::to_string(inside) + " STAT_POWER in window, recall " +
              (rec ? fmt(*rec) : std::string("n/a"));
  }
  if (o.pass) o.detail = detail;
  return o;
}

// 7
Outcome severity_effect() {
  Outcome o;
  const auto cfg = config::default_config("two_hop_manipulation");
  std::array<std::size_t, 3> twin{0, 0, 0}, lab{0, 0, 0};
  for (int i = 0; i < 5; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const auto t = harness::make_entry(harness::execute(cfg, net::Mode::twin, s, i), cfg);
    const auto l = harness::make_entry(harness::execute(cfg, net::Mode::lab, s, i), cfg);
    for (std::size_t k = 0; k < 3; ++k) {
      twin[k] += t.stat_power_tp[k];
      lab[k] += l.stat_power_tp[k];
    }
  }
  auto text = [](const std::array<std::size_t, 3>& a) {
    return std::to_string(a[0]) + "/" + std::to_string(a[1]) + "/" + std::to_string(a[2]);
  };
  o.require(twin[2] > 0 && twin[0] == 0 && twin[1] == 0, "twin STAT_POWER TPs (low/medium/high) " + text(twin));
  o.require(lab[0] + lab[1] >= 1, "lab STAT_POWER TPs (low/medium/high) " + text(lab));
  if (o.pass) o.detail = "STAT_POWER TPs low/medium/high: twin " + text(twin) + ", lab " + text(lab);
  return o;
}

// 8
Outcome recon_detection() {
  Outcome o;
  const auto cfg = config::default_config("recon");
  const auto r = harness::execute(cfg, net::Mode::twin, seed);
  const auto scan = recall(r, "signature", "truth:scan");
  const auto login = recall(r, "signature", "truth:login_failed");
  o.require(scan && *scan == 1.0, "signature recall on scan " + (scan ? fmt(*scan) : std::string("n/a")));
  o.require(login && *login == 1.0, "signature recall on login_failed " + (login ? fmt(*login) : std::string("n/a")));

  const auto& spec = r.alerts.at(ids::Detector::spec);
  std::size_t login_frames = 0, covered = 0;
  for (const auto& c : capture::merge_captures(r.outputs.captures)) {
    if (c.protocol != net::Protocol::telnet) continue;
    bool login_phase = false;
    try {
      login_phase = telnet::is_login_phase(telnet::decode(c.payload).kind);
    } catch (const Error&) {
    }
    if (!login_phase) continue;
    ++login_frames;
    covered += std::any_of(spec.begin(), spec.end(),
                           [&](const ids::Alert& a) { return a.label == "P1" && a.t == c.seconds(); });
  }
  o.require(login_frames > 0 && covered == login_frames,
            "P1 on " + std::to_string(covered) + " of " + std::to_string(login_frames) + " login frames");
  std::size_t scan_related = 0;
  for (const auto& a : spec)
    for (const auto& e : r.outputs.truth)
      scan_related += e.label == "scan" && ids::alert_matches(a, e, cfg.ids.tolerance_s, cfg.ids.mapping);
  o.require(scan_related == 0, std::to_string(scan_related) + " spec alerts credited to the scan");
  if (o.pass)
    o.detail = "signature recall scan 1, login_failed 1; P1 on " + std::to_string(login_frames) +
               " login frames; 0 scan-related spec alerts";
  return o;
}

// 9
Outcome exfiltration() {
  Outcome o;
  const auto cfg = config::default_config("exfiltration");
  const auto r = harness::execute(cfg, net::Mode::twin, seed);
  std::optional<double> tail_at;
  for (const auto& c : capture::merge_captures(r.outputs.captures)) {
    if (c.protocol != net::Protocol::telnet) continue;
    try {
      const auto m = telnet::decode(c.payload);
      if (m.kind == telnet::Kind::command && m.text.rfind("tail", 0) == 0) {
        tail_at = c.seconds();
        break;
      }
    } catch (const Error&) {
    }
  }
  o.require(tail_at.has_value(), "no tail command in the capture");
  const auto& spec = r.alerts.at(ids::Detector::spec);
  const bool dc = tail_at && std::any_of(spec.begin(), spec.end(), [&](const ids::Alert& a) {
                    return a.label == "DC" && a.t == *tail_at;
                  });
  o.require(dc, "no DC alert on the tail command");
  const auto base = harness::simulate(config::default_config("baseline"), net::Mode::twin, seed);
  o.require(!r.outputs.power.empty() && r.outputs.power == base.power, "power series differs from baseline");
  if (o.pass)
    o.detail = "DC at t=" + fmt(*tail_at) + " s; " + std::to_string(base.power.size()) +
               " power samples identical to baseline";
  return o;
}

// 10
Outcome conservation() {
  Outcome o;
  const std::vector<double> tolerances{0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 120.0};
  std::size_t runs = 0;
  for (const auto& name : attack::scenario_names())
    for (auto mode : {net::Mode::twin, net::Mode::lab}) {
      const auto cfg = config::default_config(name);
      const auto r = harness::execute(cfg, mode, seed);
      ++runs;
      std::vector<ids::Alert> all;
      for (const auto& [d, alerts] : r.alerts) {
        const auto* row = r.metrics.find(ids::to_string(d), "all");
        o.require(row && row->tp + row->fp == alerts.size(),
                  name + ": " + ids::to_string(d) + " tp+fp differs from its alert count");
        all.insert(all.end(), alerts.begin(), alerts.end());
      }
      for (auto d : harness::all_detectors()) {
        double last = -1;
        for (double tol : tolerances) {
          const auto m = ids::evaluate(all, r.outputs.truth, tol, cfg.ids.mapping, harness::all_detectors());
          const auto rec = m.find(ids::to_string(d), "all")->recall();
          if (!rec) continue;
          o.require(*rec >= last, name + ": " + ids::to_string(d) + " recall drops at tolerance " + fmt(tol));
          last = *rec;
        }
      }
    }
  if (o.pass) o.detail = std::to_string(runs) + " runs conserve counts; recall non-decreasing over 8 tolerances";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"determinism and runtime", determinism},
      {"codec round-trip", codec},
      {"power-flow oracle", power_flow},
      {"baseline cleanliness", baseline_clean},
      {"P1 completeness", p1_completeness},
      {"attack effects", attack_effects},
      {"twin vs lab severity", severity_effect},
      {"recon detection", recon_detection},
      {"exfiltration", exfiltration},
      {"evaluation conservation", conservation},
  };
  fs::remove_all(work);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2zu %-26s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  }
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
