#include "scadatwin/scadatwin.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "scadatwin/config.hpp"
#include "scadatwin/error.hpp"
#include "scadatwin/harness.hpp"

using namespace scadatwin;
namespace fs = std::filesystem;

struct sct_config {
  config::ScenarioConfig cfg;
};

struct sct_run {
  harness::RunResult result;
  config::ScenarioConfig cfg;
};

namespace {

thread_local std::string last_error;

sct_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoConvergence: return SCT_ERR_NO_CONVERGENCE;
    case ErrorCode::MalformedModel: return SCT_ERR_MALFORMED_MODEL;
    case ErrorCode::UnknownAsset: return SCT_ERR_UNKNOWN_ASSET;
    case ErrorCode::ConfigError: return SCT_ERR_CONFIG;
    case ErrorCode::ConnectionClosed: return SCT_ERR_CONNECTION_CLOSED;
    case ErrorCode::Refused: return SCT_ERR_REFUSED;
    case ErrorCode::Unreachable: return SCT_ERR_UNREACHABLE;
    case ErrorCode::UnknownTap: return SCT_ERR_UNKNOWN_TAP;
    case ErrorCode::InvalidCombination: return SCT_ERR_INVALID_COMBINATION;
    case ErrorCode::Malformed: return SCT_ERR_MALFORMED;
    case ErrorCode::AuthFailed: return SCT_ERR_AUTH_FAILED;
    case ErrorCode::UnknownCommand: return SCT_ERR_UNKNOWN_COMMAND;
    case ErrorCode::BlacklistViolation: return SCT_ERR_BLACKLIST_VIOLATION;
    case ErrorCode::ScriptInvariantBroken: return SCT_ERR_SCRIPT_INVARIANT;
    case ErrorCode::Unimplemented: return SCT_ERR_UNIMPLEMENTED;
    case ErrorCode::IoError: return SCT_ERR_IO;
    case ErrorCode::MalformedTrace: return SCT_ERR_MALFORMED_TRACE;
  }
  return SCT_ERR_INTERNAL;
}

sct_status fail(sct_status s, std::string msg) {
  last_error = std::move(msg);
  return s;
}

// Runs `f`, translating exceptions into status codes.
template <class F>
sct_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return SCT_OK;
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::invalid_argument& e) {
    return fail(SCT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SCT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SCT_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

net::Mode mode_of(sct_mode m) {
  if (m == SCT_MODE_TWIN) return net::Mode::twin;
  if (m == SCT_MODE_LAB) return net::Mode::lab;
  throw Error(ErrorCode::ConfigError, "unknown mode value");
}

ids::Detector detector_of(sct_detector d) {
  switch (d) {
    case SCT_DETECTOR_SIGNATURE: return ids::Detector::signature;
    case SCT_DETECTOR_SPEC: return ids::Detector::spec;
    case SCT_DETECTOR_STAT: return ids::Detector::stat;
  }
  throw Error(ErrorCode::ConfigError, "unknown detector value");
}

void collect_runs(const fs::path& p, std::vector<fs::path>& out) {
  if (!fs::exists(p)) throw Error(ErrorCode::IoError, "no such path " + p.string());
  if (fs::exists(p / "meta.json")) {
    out.push_back(p);
    return;
  }
  if (!fs::is_directory(p)) throw Error(ErrorCode::IoError, p.string() + " is not a run directory");
  std::vector<fs::path> children;
  for (const auto& entry : fs::directory_iterator(p))
    if (entry.is_directory()) children.push_back(entry.path());
  std::sort(children.begin(), children.end());
  for (const auto& c : children) collect_runs(c, out);
}

}  // namespace

#define SCT_REQUIRE(cond) \
  if (!(cond)) return fail(SCT_ERR_INVALID_ARGUMENT, "invalid argument: " #cond)

extern "C" {

SCT_API const char* sct_version(void) { return "1.0.0"; }

SCT_API const char* sct_status_string(sct_status s) {
  switch (s) {
    case SCT_OK: return "ok";
    case SCT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SCT_ERR_NO_CONVERGENCE: return "no convergence";
    case SCT_ERR_MALFORMED_MODEL: return "malformed model";
    case SCT_ERR_UNKNOWN_ASSET: return "unknown asset";
    case SCT_ERR_CONFIG: return "configuration error";
    case SCT_ERR_CONNECTION_CLOSED: return "connection closed";
    case SCT_ERR_REFUSED: return "connection refused";
    case SCT_ERR_UNREACHABLE: return "unreachable";
    case SCT_ERR_UNKNOWN_TAP: return "unknown tap";
    case SCT_ERR_INVALID_COMBINATION: return "invalid combination";
    case SCT_ERR_MALFORMED: return "malformed data";
    case SCT_ERR_AUTH_FAILED: return "authentication failed";
    case SCT_ERR_UNKNOWN_COMMAND: return "unknown command";
    case SCT_ERR_BLACKLIST_VIOLATION: return "blacklist violation";
    case SCT_ERR_SCRIPT_INVARIANT: return "script invariant broken";
    case SCT_ERR_UNIMPLEMENTED: return "unimplemented";
    case SCT_ERR_IO: return "i/o error";
    case SCT_ERR_MALFORMED_TRACE: return "malformed trace";
    case SCT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

SCT_API const char* sct_last_error(void) { return last_error.c_str(); }

SCT_API void sct_string_free(char* s) { std::free(s); }

SCT_API size_t sct_scenario_count(void) { return attack::scenario_names().size(); }

SCT_API const char* sct_scenario_name(size_t index) {
  const auto& names = attack::scenario_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

SCT_API sct_status sct_mode_parse(const char* name, sct_mode* out) {
  SCT_REQUIRE(name && out);
  return guarded([&] { *out = net::mode_from(name) == net::Mode::twin ? SCT_MODE_TWIN : SCT_MODE_LAB; });
}

SCT_API sct_status sct_detector_parse(const char* name, sct_detector* out) {
  SCT_REQUIRE(name && out);
  return guarded([&] {
    switch (ids::detector_from(name)) {
      case ids::Detector::signature: *out = SCT_DETECTOR_SIGNATURE; break;
      case ids::Detector::spec: *out = SCT_DETECTOR_SPEC; break;
      case ids::Detector::stat: *out = SCT_DETECTOR_STAT; break;
    }
  });
}

SCT_API sct_status sct_config_default(const char* scenario, sct_config** out) {
  SCT_REQUIRE(scenario && out);
  *out = nullptr;
  return guarded([&] { *out = new sct_config{config::default_config(scenario)}; });
}

SCT_API sct_status sct_config_parse(const char* json_text, sct_config** out) {
  SCT_REQUIRE(json_text && out);
  *out = nullptr;
  return guarded([&] { *out = new sct_config{config::parse_config(json_text)}; });
}

SCT_API sct_status sct_config_load(const char* path, sct_config** out) {
  SCT_REQUIRE(path && out);
  *out = nullptr;
  return guarded([&] { *out = new sct_config{config::load_config(path)}; });
}

SCT_API sct_status sct_config_save(const sct_config* cfg, const char* path) {
  SCT_REQUIRE(cfg && path);
  return guarded([&] { config::save_config(cfg->cfg, path); });
}

SCT_API sct_status sct_config_to_json(const sct_config* cfg, char** out) {
  SCT_REQUIRE(cfg && out);
  *out = nullptr;
  return guarded([&] { *out = dup(config::to_json_text(cfg->cfg)); });
}

SCT_API sct_status sct_config_validate(const sct_config* cfg) {
  SCT_REQUIRE(cfg);
  return guarded([&] { cfg->cfg.validate(); });
}

SCT_API sct_status sct_config_set_seed(sct_config* cfg, uint64_t seed) {
  SCT_REQUIRE(cfg);
  cfg->cfg.sim.seed = seed;
  last_error.clear();
  return SCT_OK;
}

SCT_API sct_status sct_config_seed(const sct_config* cfg, uint64_t* out) {
  SCT_REQUIRE(cfg && out);
  *out = cfg->cfg.sim.seed;
  last_error.clear();
  return SCT_OK;
}

SCT_API sct_status sct_config_set_repetitions(sct_config* cfg, int repetitions) {
  SCT_REQUIRE(cfg);
  if (repetitions < 1) return fail(SCT_ERR_CONFIG, "ConfigError: repetitions must be at least 1");
  cfg->cfg.repetitions = repetitions;
  last_error.clear();
  return SCT_OK;
}

SCT_API sct_status sct_config_set_duration(sct_config* cfg, double seconds) {
  SCT_REQUIRE(cfg);
  if (!(seconds > 0)) return fail(SCT_ERR_CONFIG, "ConfigError: duration must be positive");
  cfg->cfg.sim.duration_s = seconds;
  last_error.clear();
  return SCT_OK;
}

SCT_API sct_status sct_config_scenario(const sct_config* cfg, char** out) {
  SCT_REQUIRE(cfg && out);
  *out = nullptr;
  return guarded([&] { *out = dup(cfg->cfg.scenario); });
}

SCT_API void sct_config_free(sct_config* cfg) { delete cfg; }

SCT_API sct_status sct_run_execute(const sct_config* cfg, sct_mode mode, uint64_t seed, int repetition,
                                   sct_run** out) {
  SCT_REQUIRE(cfg && out && repetition >= 0);
  *out = nullptr;
  return guarded([&] {
    auto run = std::make_unique<sct_run>();
    run->cfg = cfg->cfg;
    run->result = harness::execute(cfg->cfg, mode_of(mode), seed, repetition);
    *out = run.release();
  });
}

SCT_API sct_status sct_run_write(const sct_run* run, const char* dir) {
  SCT_REQUIRE(run && dir);
  return guarded([&] { harness::write_result(run->result, run->cfg, dir); });
}

SCT_API sct_status sct_run_frame_count(const sct_run* run, const char* tap, size_t* out) {
  SCT_REQUIRE(run && tap && out);
  return guarded([&] {
    const auto& captures = run->result.outputs.captures;
    auto it = captures.find(tap);
    if (it == captures.end()) throw Error(ErrorCode::UnknownTap, std::string("no tap '") + tap + "'");
    *out = it->second.size();
  });
}

SCT_API sct_status sct_run_truth_count(const sct_run* run, size_t* out) {
  SCT_REQUIRE(run && out);
  *out = run->result.outputs.truth.size();
  last_error.clear();
  return SCT_OK;
}

SCT_API sct_status sct_run_alert_count(const sct_run* run, sct_detector detector, const char* label, size_t* out) {
  SCT_REQUIRE(run && out);
  return guarded([&] {
    auto it = run->result.alerts.find(detector_of(detector));
    std::size_t n = 0;
    if (it != run->result.alerts.end())
      for (const auto& a : it->second)
        if (!label || a.label == label) ++n;
    *out = n;
  });
}

SCT_API sct_status sct_run_metric(const sct_run* run, sct_detector detector, const char* label, sct_metric* out) {
  SCT_REQUIRE(run && label && out);
  return guarded([&] {
    const auto* row = run->result.metrics.find(ids::to_string(detector_of(detector)), label);
    if (!row) throw std::invalid_argument(std::string("no metric row for label '") + label + "'");
    *out = sct_metric{};
    out->tp = row->tp;
    out->fp = row->fp;
    out->events = row->events;
    out->detected = row->detected;
    if (auto v = row->precision()) out->has_precision = 1, out->precision = *v;
    if (auto v = row->recall()) out->has_recall = 1, out->recall = *v;
    if (auto v = row->latency()) out->has_latency = 1, out->latency_s = *v;
  });
}

SCT_API sct_status sct_run_metrics_csv(const sct_run* run, char** out) {
  SCT_REQUIRE(run && out);
  *out = nullptr;
  return guarded([&] { *out = dup(ids::metrics_csv(run->result.metrics)); });
}

SCT_API void sct_run_free(sct_run* run) { delete run; }

SCT_API sct_status sct_simulate_to_dir(const sct_config* cfg, sct_mode mode, uint64_t seed, int repetition,
                                       const char* dir) {
  SCT_REQUIRE(cfg && dir && repetition >= 0);
  return guarded([&] {
    auto outputs = harness::simulate(cfg->cfg, mode_of(mode), seed, repetition);
    harness::write_outputs(outputs, cfg->cfg, dir);
  });
}

SCT_API sct_status sct_detect_dir(const char* dir, sct_detector detector, size_t* alert_count) {
  SCT_REQUIRE(dir);
  return guarded([&] {
    auto alerts = harness::detect_dir(dir, detector_of(detector));
    if (alert_count) *alert_count = alerts.size();
  });
}

SCT_API sct_status sct_evaluate_dir(const char* dir, char** metrics_csv) {
  SCT_REQUIRE(dir);
  if (metrics_csv) *metrics_csv = nullptr;
  return guarded([&] {
    auto entry = harness::evaluate_dir(dir);
    if (metrics_csv) *metrics_csv = dup(ids::metrics_csv(entry.metrics));
  });
}

SCT_API sct_status sct_report_dirs(const char* const* paths, size_t count, const char* out_dir, char** summary) {
  SCT_REQUIRE(out_dir && (paths || count == 0));
  if (summary) *summary = nullptr;
  return guarded([&] {
    std::vector<fs::path> runs;
    if (count == 0) {
      collect_runs(out_dir, runs);
    } else {
      for (size_t i = 0; i < count; ++i) {
        if (!paths[i]) throw std::invalid_argument("null path");
        collect_runs(paths[i], runs);
      }
    }
    if (runs.empty()) throw Error(ErrorCode::IoError, "no run directories found");
    std::vector<harness::RunEntry> entries;
    for (const auto& r : runs) entries.push_back(harness::evaluate_dir(r));
    auto report = harness::build_report(std::move(entries));
    harness::write_report(report, out_dir);
    if (summary) *summary = dup(harness::summary_text(report));
  });
}

SCT_API sct_status sct_run_matrix(const sct_config* cfg, const char* out_dir, int modes, char** summary) {
  SCT_REQUIRE(cfg && out_dir && modes >= SCT_MODES_TWIN && modes <= SCT_MODES_BOTH);
  if (summary) *summary = nullptr;
  return guarded([&] {
    std::vector<net::Mode> list;
    if (modes & SCT_MODES_TWIN) list.push_back(net::Mode::twin);
    if (modes & SCT_MODES_LAB) list.push_back(net::Mode::lab);
    auto report = harness::run_matrix(cfg->cfg, out_dir, list);
    if (summary) *summary = dup(harness::summary_text(report));
  });
}

}  // extern "C"
