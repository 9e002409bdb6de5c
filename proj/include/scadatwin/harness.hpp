#pragma once

// Scenario runner: single runs, run directories, the twin/lab repetition
// matrix and the report assembled from it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scadatwin/capture.hpp"
#include "scadatwin/config.hpp"
#include "scadatwin/ids.hpp"

namespace scadatwin::harness {

inline const std::vector<ids::Detector>& all_detectors() {
  static const std::vector<ids::Detector> d{ids::Detector::signature, ids::Detector::spec, ids::Detector::stat};
  return d;
}

std::vector<ids::Alert> detect(const capture::RunOutputs& run, ids::Detector detector,
                               const config::ScenarioConfig& cfg);

struct RunResult {
  capture::RunOutputs outputs;
  std::map<ids::Detector, std::vector<ids::Alert>> alerts;
  ids::Metrics metrics;
};

/// Runs every detector over `outputs` and scores them.
RunResult analyze(capture::RunOutputs outputs, const config::ScenarioConfig& cfg);
/// Simulates one run (seed as given) without detection.
capture::RunOutputs simulate(const config::ScenarioConfig& cfg, net::Mode mode, std::uint64_t seed,
                             int repetition = 0);
RunResult execute(const config::ScenarioConfig& cfg, net::Mode mode, std::uint64_t seed, int repetition = 0);

/// Run files plus config.json.
void write_outputs(const capture::RunOutputs& outputs, const config::ScenarioConfig& cfg,
                   const std::filesystem::path& dir);
/// Run files, config.json, alerts_<detector>.jsonl and the run's metrics.csv.
void write_result(const RunResult& r, const config::ScenarioConfig& cfg, const std::filesystem::path& dir);

/// Configuration stored with a run, or the scenario default when absent.
config::ScenarioConfig run_config(const std::filesystem::path& dir);

std::filesystem::path alerts_file(const std::filesystem::path& dir, ids::Detector d);
std::vector<ids::Alert> detect_dir(const std::filesystem::path& dir, ids::Detector d);

struct RunEntry {
  std::string scenario;
  net::Mode mode = net::Mode::twin;
  int repetition = 0;
  std::uint64_t seed = 0;
  ids::Metrics metrics;
  /// STAT_POWER true positives by severity (low, medium, high).
  std::array<std::size_t, 3> stat_power_tp{0, 0, 0};
  std::size_t alert_count = 0;
};

RunEntry make_entry(const RunResult& r, const config::ScenarioConfig& cfg);

/// Scores the alert files of a run directory (running missing detectors)
/// and rewrites its metrics.csv.
RunEntry evaluate_dir(const std::filesystem::path& dir);

struct Report {
  std::vector<RunEntry> runs;
  ids::Metrics totals;
};

Report build_report(std::vector<RunEntry> runs);
std::string runs_csv(const Report& r);
std::string summary_text(const Report& r);
/// metrics.csv (summed counts), runs.csv and summary.txt under `dir`.
void write_report(const Report& r, const std::filesystem::path& dir);

/// scenario × modes × repetitions with seeds seed + i, written to
/// out/<scenario>/<mode>/rep<i>; the report lands in `out`.
Report run_matrix(const config::ScenarioConfig& cfg, const std::filesystem::path& out,
                  const std::vector<net::Mode>& modes = {net::Mode::twin, net::Mode::lab});

}  // namespace scadatwin::harness
