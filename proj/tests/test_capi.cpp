#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "scadatwin/scadatwin.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  sct_string_free(s);
  return out;
}

struct ConfigHandle {
  sct_config* p = nullptr;
  ~ConfigHandle() { sct_config_free(p); }
};

struct RunHandle {
  sct_run* p = nullptr;
  ~RunHandle() { sct_run_free(p); }
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("scadatwin_capi_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("enumerations and names") {
    CHECK(std::strlen(sct_version()) > 0);
    REQUIRE(sct_scenario_count() == 6);
    CHECK(std::string(sct_scenario_name(0)) == "baseline");
    CHECK(sct_scenario_name(6) == nullptr);
    sct_mode m;
    CHECK(sct_mode_parse("lab", &m) == SCT_OK);
    CHECK(m == SCT_MODE_LAB);
    CHECK(sct_mode_parse("hardware", &m) == SCT_ERR_CONFIG);
    sct_detector d;
    CHECK(sct_detector_parse("stat", &d) == SCT_OK);
    CHECK(d == SCT_DETECTOR_STAT);
    CHECK(sct_detector_parse("ml", &d) == SCT_ERR_CONFIG);
    CHECK(std::string(sct_status_string(SCT_ERR_CONFIG)).size() > 0);
  }

  TEST_CASE("null arguments are rejected") {
    CHECK(sct_config_default(nullptr, nullptr) == SCT_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(sct_last_error()) > 0);
    CHECK(sct_config_validate(nullptr) == SCT_ERR_INVALID_ARGUMENT);
    CHECK(sct_run_execute(nullptr, SCT_MODE_TWIN, 1, 0, nullptr) == SCT_ERR_INVALID_ARGUMENT);
    sct_config_free(nullptr);
    sct_run_free(nullptr);
    sct_string_free(nullptr);
  }

  TEST_CASE("configuration errors map to status codes") {
    ConfigHandle c;
    CHECK(sct_config_default("bogus", &c.p) == SCT_ERR_CONFIG);
    CHECK(c.p == nullptr);
    CHECK(std::string(sct_last_error()).find("bogus") != std::string::npos);
    CHECK(sct_config_parse("{not json", &c.p) == SCT_ERR_CONFIG);
    CHECK(sct_config_load("/nonexistent/x.json", &c.p) == SCT_ERR_IO);
    REQUIRE(sct_config_parse(R"({"scenario":"exfiltration"})", &c.p) == SCT_OK);
    CHECK(std::strlen(sct_last_error()) == 0);
    char* name = nullptr;
    REQUIRE(sct_config_scenario(c.p, &name) == SCT_OK);
    CHECK(take(name) == "exfiltration");
    CHECK(sct_config_set_repetitions(c.p, 0) == SCT_ERR_CONFIG);
    CHECK(sct_config_set_duration(c.p, -1) == SCT_ERR_CONFIG);
  }

  TEST_CASE("configuration round-trip through a file") {
    ConfigHandle a, b;
    REQUIRE(sct_config_default("recon", &a.p) == SCT_OK);
    REQUIRE(sct_config_set_seed(a.p, 77) == SCT_OK);
    const auto file = scratch("cfg.json");
    REQUIRE(sct_config_save(a.p, file.c_str()) == SCT_OK);
    REQUIRE(sct_config_load(file.c_str(), &b.p) == SCT_OK);
    std::uint64_t seed = 0;
    CHECK(sct_config_seed(b.p, &seed) == SCT_OK);
    CHECK(seed == 77);
    char *ja = nullptr, *jb = nullptr;
    REQUIRE(sct_config_to_json(a.p, &ja) == SCT_OK);
    REQUIRE(sct_config_to_json(b.p, &jb) == SCT_OK);
    CHECK(take(ja) == take(jb));
    CHECK(sct_config_validate(b.p) == SCT_OK);
    fs::remove(file);
  }

  TEST_CASE("executing a run") {
    ConfigHandle c;
    REQUIRE(sct_config_default("recon", &c.p) == SCT_OK);
    RunHandle r;
    REQUIRE(sct_run_execute(c.p, SCT_MODE_TWIN, 3, 0, &r.p) == SCT_OK);
    size_t frames = 0, truth = 0, alerts = 0, scans = 0;
    CHECK(sct_run_frame_count(r.p, "attacker_switch", &frames) == SCT_OK);
    CHECK(frames > 0);
    CHECK(sct_run_frame_count(r.p, "nowhere", &frames) == SCT_ERR_UNKNOWN_TAP);
    CHECK(sct_run_truth_count(r.p, &truth) == SCT_OK);
    CHECK(truth == 4);
    CHECK(sct_run_alert_count(r.p, SCT_DETECTOR_SIGNATURE, nullptr, &alerts) == SCT_OK);
    CHECK(sct_run_alert_count(r.p, SCT_DETECTOR_SIGNATURE, "SCAN", &scans) == SCT_OK);
    CHECK(scans >= 1);
    CHECK(alerts >= scans);
    sct_metric m{};
    REQUIRE(sct_run_metric(r.p, SCT_DETECTOR_SIGNATURE, "truth:scan", &m) == SCT_OK);
    CHECK(m.events == 1);
    CHECK(m.detected == 1);
    CHECK(m.has_recall);
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(sct_run_metric(r.p, SCT_DETECTOR_SIGNATURE, "NO_SUCH_LABEL", &m) == SCT_ERR_INVALID_ARGUMENT);
    char* csv = nullptr;
    REQUIRE(sct_run_metrics_csv(r.p, &csv) == SCT_OK);
    CHECK(take(csv).rfind("detector,label,", 0) == 0);

    const auto dir = scratch("run");
    REQUIRE(sct_run_write(r.p, dir.c_str()) == SCT_OK);
    CHECK(fs::exists(dir / "alerts_spec.jsonl"));
    CHECK(fs::exists(dir / "metrics.csv"));
    fs::remove_all(dir);
  }

  TEST_CASE("directory workflow") {
    ConfigHandle c;
    REQUIRE(sct_config_default("exfiltration", &c.p) == SCT_OK);
    const auto dir = scratch("dir");
    REQUIRE(sct_simulate_to_dir(c.p, SCT_MODE_LAB, 11, 0, dir.c_str()) == SCT_OK);
    CHECK_FALSE(fs::exists(dir / "alerts_spec.jsonl"));
    size_t n = 0;
    REQUIRE(sct_detect_dir(dir.c_str(), SCT_DETECTOR_SPEC, &n) == SCT_OK);
    CHECK(n > 0);
    CHECK(fs::exists(dir / "alerts_spec.jsonl"));
    char* csv = nullptr;
    REQUIRE(sct_evaluate_dir(dir.c_str(), &csv) == SCT_OK);
    CHECK(take(csv).find("spec,all,") != std::string::npos);

    const auto out = scratch("report");
    const char* paths[] = {dir.c_str()};
    char* summary = nullptr;
    REQUIRE(sct_report_dirs(paths, 1, out.c_str(), &summary) == SCT_OK);
    CHECK(take(summary).find("runs: 1") == 0);
    CHECK(fs::exists(out / "runs.csv"));
    CHECK(sct_detect_dir("/nonexistent/run", SCT_DETECTOR_SPEC, &n) != SCT_OK);
    fs::remove_all(dir);
    fs::remove_all(out);
  }

  TEST_CASE("matrix through the C surface") {
    ConfigHandle c;
    REQUIRE(sct_config_default("baseline", &c.p) == SCT_OK);
    REQUIRE(sct_config_set_repetitions(c.p, 1) == SCT_OK);
    REQUIRE(sct_config_set_duration(c.p, 60) == SCT_OK);
    const auto out = scratch("matrix");
    char* summary = nullptr;
    REQUIRE(sct_run_matrix(c.p, out.c_str(), SCT_MODES_TWIN, &summary) == SCT_OK);
    CHECK(take(summary).find("runs: 1") == 0);
    CHECK(fs::exists(out / "baseline" / "twin" / "rep0" / "meta.json"));
    CHECK_FALSE(fs::exists(out / "baseline" / "lab"));
    CHECK(sct_run_matrix(c.p, out.c_str(), 0, &summary) == SCT_ERR_INVALID_ARGUMENT);
    fs::remove_all(out);
  }
}
