#include <doctest.h>

#include <functional>
#include <optional>

#include "scadatwin/attacker.hpp"
#include "scadatwin/config.hpp"
#include "scadatwin/error.hpp"
#include "scadatwin/simulation.hpp"

using namespace scadatwin;
using namespace scadatwin::attack;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

AttackScript script(std::vector<Step> steps) {
  AttackScript s;
  s.attacker_host = "attacker";
  s.blacklist = {"10.0.1.22"};
  s.steps = std::move(steps);
  return s;
}

std::vector<std::string> labels(const std::vector<TruthEvent>& truth) {
  std::vector<std::string> out;
  for (const auto& e : truth) out.push_back(e.label);
  return out;
}

capture::RunOutputs run_custom(std::vector<Step> steps, double duration = 60) {
  auto cfg = config::default_config("baseline");
  cfg.sim.duration_s = duration;
  cfg.steps = std::move(steps);
  return sim::run(config::simulation_input(cfg, net::Mode::twin, 42));
}

}  // namespace

TEST_SUITE("attacker") {
  TEST_CASE("address ranges expand inclusively") {
    CHECK(expand_range("10.0.0.8-10.0.0.10") == std::vector<std::string>{"10.0.0.8", "10.0.0.9", "10.0.0.10"});
    CHECK(expand_range("10.0.0.8") == std::vector<std::string>{"10.0.0.8"});
    CHECK_THROWS_AS(expand_range("10.0.0.9-10.0.0.8"), Error);
    CHECK_THROWS_AS(expand_range("10.0.0-10.0.1"), Error);
  }

  TEST_CASE("script validation happens before any traffic") {
    const auto topo = config::default_config("baseline").topology;
    CHECK(code_of([&] { script({{1, "x", TelnetConnect{"s", "10.0.1.22", {}, {}}}}).validate(topo); }) ==
          ErrorCode::BlacklistViolation);
    CHECK(code_of([&] { script({{1, "x", NetworkScan{{"10.0.1.21", "10.0.1.22"}, {23}, 10}}}).validate(topo); }) ==
          ErrorCode::BlacklistViolation);
    CHECK(code_of([&] {
            script({{1, "a", TelnetConnect{"s", "10.0.1.21", {}, {}}}, {2, "b", ExecCommand{"s", "telnet 10.0.1.22"}}})
                .validate(topo);
          }) == ErrorCode::BlacklistViolation);
    CHECK(code_of([&] { script({{1, "x", SshConnect{"s", "10.0.1.21"}}}).validate(topo); }) == ErrorCode::Unimplemented);
    CHECK(code_of([&] {
            script({{5, "a", TelnetConnect{"s", "10.0.1.21", {}, {}}}, {1, "b", ExecCommand{"s", "ls"}}}).validate(topo);
          }) == ErrorCode::ScriptInvariantBroken);
    CHECK(code_of([&] { script({{1, "b", ExecCommand{"nobody", "ls"}}}).validate(topo); }) ==
          ErrorCode::ScriptInvariantBroken);
    CHECK(code_of([&] {
            script({{1, "a", TelnetConnect{"s", "10.0.1.21", {}, {}}}, {2, "a", TelnetConnect{"s", "10.0.0.11", {}, {}}}})
                .validate(topo);
          }) == ErrorCode::ScriptInvariantBroken);
    auto bad_host = script({});
    bad_host.attacker_host = "ghost";
    CHECK(code_of([&] { bad_host.validate(topo); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { script({{1, "x", NetworkScan{{}, {23}, 10}}}).validate(topo); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] {
            script({{1, "a", TelnetConnect{"s", "10.0.1.21", {}, {}}}, {2, "t", TransferFile{"s", "/f", 10, 0, ""}}})
                .validate(topo);
          }) == ErrorCode::ConfigError);
  }

  TEST_CASE("blacklisted script aborts the run with no frames") {
    auto cfg = config::default_config("baseline");
    cfg.steps = std::vector<Step>{{1, "x", TelnetConnect{"s", "10.0.1.22", {}, {}}}};
    CHECK(code_of([&] { sim::run(config::simulation_input(cfg, net::Mode::twin, 1)); }) ==
          ErrorCode::BlacklistViolation);
  }

  TEST_CASE("builtin scenarios") {
    CHECK(scenario_names().size() == 6);
    CHECK(builtin_scenario("baseline").script.steps.empty());
    CHECK_THROWS_AS(builtin_scenario("nope"), Error);
    const auto exfil = builtin_scenario("exfiltration");
    bool has_tail = false;
    for (const auto& s : exfil.script.steps)
      if (auto* e = std::get_if<ExecCommand>(&s.action)) has_tail |= e->command.rfind("tail ", 0) == 0;
    CHECK(has_tail);
    CHECK(builtin_scenario("two_hop_shutdown").pivot_vulnerability == devices::Vulnerability::shutdown_on_unknown_ioa);
    CHECK(builtin_scenario("two_hop_slowdown").pivot_vulnerability == devices::Vulnerability::slowdown_on_unknown_ioa);
  }

  TEST_CASE("two-hop run yields the documented truth sequence") {
    auto cfg = config::default_config("two_hop_manipulation");
    const auto out = sim::run(config::simulation_input(cfg, net::Mode::twin, 42));
    CHECK(labels(out.truth) == std::vector<std::string>{"scan", "telnet_login", "file_transfer", "telnet_login",
                                                        "file_transfer", "tamper_install", "command_manipulation"});
    const auto& first = out.captures.at("attacker_switch").front();
    CHECK(first.src_addr() == "10.0.9.66");
    CHECK((first.protocol == net::Protocol::scan || to_text(first.payload) == net::syn_payload));
  }

  TEST_CASE("recon counts") {
    const auto out = sim::run(config::simulation_input(config::default_config("recon"), net::Mode::twin, 42));
    std::size_t probes = 0;
    for (const auto& r : out.captures.at("attacker_switch"))
      if (r.protocol == net::Protocol::scan && to_text(r.payload).rfind("PROBE", 0) == 0) ++probes;
    CHECK(probes == 16);
    std::size_t failed = 0;
    for (const auto& e : out.truth) failed += e.label == login_failed;
    CHECK(failed == 3);
  }

  TEST_CASE("hop through a pivot and transfer a file") {
    const auto out = run_custom({{1, "telnet_login", TelnetConnect{"p", "10.0.1.21", {}, {}}},
                                 {2, "telnet_login", TelnetConnect{"m", "10.0.0.11", std::string("p"), {}}},
                                 {3, "file_transfer", TransferFile{"m", "/tmp/x.bin", 3000, 1000, ""}},
                                 {4, "exec", ExecCommand{"m", "ls"}}});
    CHECK(labels(out.truth) == std::vector<std::string>{"telnet_login", "telnet_login", "file_transfer", "exec"});
    for (const auto& e : out.truth) CHECK(e.end >= e.start);
  }

  TEST_CASE("failures replace the step label") {
    devices::Credentials wrong{"admin", "wrong"};
    const auto out = run_custom({{1, "telnet_login", TelnetConnect{"a", "10.0.1.21", {}, wrong}},
                                 {2, "telnet_login", TelnetConnect{"b", "10.0.1.21", {}, {}}},
                                 {3, "exec", ExecCommand{"b", "cat /missing"}},
                                 {4, "telnet_login", TelnetConnect{"c", "10.0.9.66", std::string("b"), {}}}});
    CHECK(labels(out.truth) ==
          std::vector<std::string>{login_failed, "telnet_login", command_failed, connection_refused});
  }
}
