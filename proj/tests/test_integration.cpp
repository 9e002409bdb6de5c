#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <sys/wait.h>

#include "scadatwin/capture.hpp"
#include "scadatwin/ids.hpp"
#include "scadatwin/protocol.hpp"

using namespace scadatwin;
namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "scadatwin_integration";

int cli(const std::string& args, const std::string& log = "cli.log") {
  fs::create_directories(work);
  const std::string cmd = std::string("\"") + SCADATWIN_CLI + "\" " + args + " > \"" + (work / log).string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path& baseline_run() {
  static const fs::path dir = [] {
    const fs::path d = work / "baseline";
    fs::remove_all(d);
    REQUIRE(cli("run --scenario baseline --seed 42 --out \"" + d.string() + "\"") == 0);
    return d;
  }();
  return dir;
}

using Command = std::tuple<int, int, int, std::uint32_t, float>;

// setpoint and interrogation ASDUs seen at the MTU tap
std::multiset<Command> commands(const std::vector<capture::CaptureRecord>& cap) {
  std::multiset<Command> out;
  for (const auto& r : cap) {
    if (r.protocol != net::Protocol::iec104) continue;
    const auto apdu = iec104::decode_apdu(r.payload);
    if (!apdu.asdu || apdu.asdu->type == iec104::TypeId::measured_float) continue;
    const auto& a = *apdu.asdu;
    out.insert({static_cast<int>(a.type), static_cast<int>(a.cot), a.common_address, a.ioa, a.value});
  }
  return out;
}

}  // namespace

TEST_SUITE("integration") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(cli("") == 2);
    CHECK(cli("run --scenario nosuch --out x") == 2);
    CHECK(cli("run --scenario baseline") == 2);
    CHECK(cli("detect --ids ml --run .") == 2);
    CHECK(cli("detect --ids spec --run /nonexistent/run") == 2);
    CHECK(cli("--help") == 0);
  }

  TEST_CASE("runtime errors exit with 1 and name the status") {
    fs::create_directories(work);
    { std::ofstream(work / "bad.json") << "{\"scenario\": 5}"; }
    CHECK(cli("run --config \"" + (work / "bad.json").string() + "\" --out \"" + (work / "bad").string() + "\"",
              "bad.log") == 1);
    CHECK(slurp(work / "bad.log").rfind("error: ", 0) == 0);
    CHECK(cli("evaluate --run \"" + work.string() + "\"", "eval.log") == 1);
  }

  TEST_CASE("scenarios are listed") {
    REQUIRE(cli("scenarios", "scenarios.log") == 0);
    CHECK(slurp(work / "scenarios.log") ==
          "baseline\ntwo_hop_manipulation\ntwo_hop_shutdown\ntwo_hop_slowdown\nexfiltration\nrecon\n");
  }

  TEST_CASE("run writes the documented files") {
    const auto& dir = baseline_run();
    for (const char* f : {"capture_switch_mtu.jsonl", "capture_attacker_switch.jsonl", "power.csv", "truth.jsonl",
                          "meta.json", "config.json"})
      CHECK_MESSAGE(fs::exists(dir / f), f);
    const auto run = capture::read_run(dir);
    CHECK(run.meta.seed == 42);
    CHECK(run.meta.scenario == "baseline");
    CHECK(run.truth.empty());
    CHECK(run.captures.at("attacker_switch").empty());
    CHECK(slurp(dir / "power.csv").rfind("t,point,p_kw\n", 0) == 0);
  }

  TEST_CASE("same seed gives byte-identical files") {
    const auto& a = baseline_run();
    const fs::path b = work / "baseline_again";
    fs::remove_all(b);
    REQUIRE(cli("run --scenario baseline --seed 42 --out \"" + b.string() + "\"") == 0);
    for (const char* f : {"capture_switch_mtu.jsonl", "power.csv", "truth.jsonl", "meta.json"})
      CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }

  TEST_CASE("baseline carries ten setpoint bursts") {
    const auto run = capture::read_run(baseline_run());
    std::vector<double> times;
    for (const auto& r : run.captures.at("switch_mtu")) {
      if (r.protocol != net::Protocol::iec104 || r.dst_port() != 2404) continue;
      const auto apdu = iec104::decode_apdu(r.payload);
      if (apdu.asdu && apdu.asdu->type == iec104::TypeId::setpoint_float && apdu.asdu->cot == iec104::Cot::activation &&
          r.src_addr() == "10.0.0.11")
        times.push_back(r.seconds());
    }
    std::size_t bursts = 0;
    for (std::size_t i = 0; i < times.size(); ++i)
      if (i == 0 || times[i] - times[i - 1] > 5.0) ++bursts;
    CHECK(bursts == 10);
  }

  TEST_CASE("detect and evaluate through the command line") {
    const auto& dir = baseline_run();
    REQUIRE(cli("detect --ids spec --run \"" + dir.string() + "\"") == 0);
    const auto alerts = ids::read_alerts(dir / "alerts_spec.jsonl");
    for (const auto& a : alerts) {
      CHECK(a.label != "IPM");
      CHECK(a.label != "NSC");
      CHECK(a.label != "UIOA");
    }
    REQUIRE(cli("evaluate --run \"" + dir.string() + "\"", "evaluate.log") == 0);
    CHECK(slurp(work / "evaluate.log") == slurp(dir / "metrics.csv"));
    REQUIRE(cli("report --out \"" + (work / "report").string() + "\" \"" + dir.string() + "\"", "report.log") == 0);
    CHECK(fs::exists(work / "report" / "summary.txt"));
  }

  TEST_CASE("lab and twin issue the same commands") {
    const fs::path twin = work / "twin", lab = work / "lab";
    fs::remove_all(twin);
    fs::remove_all(lab);
    REQUIRE(cli("run --scenario baseline --seed 5 --mode twin --out \"" + twin.string() + "\"") == 0);
    REQUIRE(cli("run --scenario baseline --seed 5 --mode lab --out \"" + lab.string() + "\"") == 0);
    const auto a = capture::read_run(twin), b = capture::read_run(lab);
    CHECK(a.meta.mode == net::Mode::twin);
    CHECK(b.meta.mode == net::Mode::lab);
    const auto ca = commands(a.captures.at("switch_mtu")), cb = commands(b.captures.at("switch_mtu"));
    CHECK(ca.size() > 10);
    CHECK(ca == cb);
    CHECK(slurp(twin / "capture_switch_mtu.jsonl") != slurp(lab / "capture_switch_mtu.jsonl"));
  }

  TEST_CASE("repetitions land in numbered directories with consecutive seeds") {
    const fs::path d = work / "reps";
    fs::remove_all(d);
    REQUIRE(cli("run --scenario recon --seed 10 --reps 2 --duration 120 --out \"" + d.string() + "\"") == 0);
    CHECK(capture::read_run(d / "rep0").meta.seed == 10);
    CHECK(capture::read_run(d / "rep1").meta.seed == 11);
    CHECK(capture::read_run(d / "rep1").meta.repetition == 1);
  }

  TEST_CASE("matrix command writes the report") {
    const fs::path d = work / "matrix";
    fs::remove_all(d);
    REQUIRE(cli("matrix --scenario exfiltration --reps 1 --modes both --out \"" + d.string() + "\"", "matrix.log") == 0);
    CHECK(slurp(work / "matrix.log") == slurp(d / "summary.txt"));
    CHECK(fs::exists(d / "exfiltration" / "lab" / "rep0" / "alerts_stat.jsonl"));
  }
}
