#include "scadatwin/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "scadatwin/error.hpp"
#include "scadatwin/simulation.hpp"

namespace scadatwin::harness {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

std::string fixed(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string bare_message(const Error& e) {
  std::string what = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
  return what;
}

}  // namespace

std::vector<ids::Alert> detect(const capture::RunOutputs& run, ids::Detector detector,
                               const config::ScenarioConfig& cfg) {
  switch (detector) {
    case ids::Detector::signature:
      return ids::signature_scan(capture::merge_captures(run.captures), cfg.ids.rules);
    case ids::Detector::spec:
      return ids::spec_analyze(capture::merge_captures(run.captures), config::spec_model(cfg));
    case ids::Detector::stat:
      return ids::stat_analyze(run, cfg.ids.stat);
  }
  return {};
}

RunResult analyze(capture::RunOutputs outputs, const config::ScenarioConfig& cfg) {
  RunResult r;
  r.outputs = std::move(outputs);
  std::vector<ids::Alert> all;
  for (auto d : all_detectors()) {
    auto alerts = detect(r.outputs, d, cfg);
    all.insert(all.end(), alerts.begin(), alerts.end());
    r.alerts[d] = std::move(alerts);
  }
  r.metrics = ids::evaluate(all, r.outputs.truth, cfg.ids.tolerance_s, cfg.ids.mapping, all_detectors());
  return r;
}

capture::RunOutputs simulate(const config::ScenarioConfig& cfg, net::Mode mode, std::uint64_t seed, int repetition) {
  return sim::run(config::simulation_input(cfg, mode, seed, repetition));
}

RunResult execute(const config::ScenarioConfig& cfg, net::Mode mode, std::uint64_t seed, int repetition) {
  return analyze(simulate(cfg, mode, seed, repetition), cfg);
}

void write_outputs(const capture::RunOutputs& outputs, const config::ScenarioConfig& cfg, const fs::path& dir) {
  capture::write_run(outputs, dir);
  config::ScenarioConfig stored = cfg;
  stored.sim.seed = outputs.meta.seed;
  stored.sim.mode = outputs.meta.mode;
  config::save_config(stored, dir / "config.json");
}

fs::path alerts_file(const fs::path& dir, ids::Detector d) {
  return dir / (std::string("alerts_") + ids::to_string(d) + ".jsonl");
}

void write_result(const RunResult& r, const config::ScenarioConfig& cfg, const fs::path& dir) {
  write_outputs(r.outputs, cfg, dir);
  for (const auto& [d, alerts] : r.alerts) ids::write_alerts(alerts, alerts_file(dir, d));
  write_text(dir / "metrics.csv", ids::metrics_csv(r.metrics));
}

config::ScenarioConfig run_config(const fs::path& dir) {
  if (fs::exists(dir / "config.json")) return config::load_config(dir / "config.json");
  return config::default_config(capture::read_run(dir).meta.scenario);
}

std::vector<ids::Alert> detect_dir(const fs::path& dir, ids::Detector d) {
  const auto cfg = run_config(dir);
  auto alerts = detect(capture::read_run(dir), d, cfg);
  ids::write_alerts(alerts, alerts_file(dir, d));
  return alerts;
}

RunEntry make_entry(const RunResult& r, const config::ScenarioConfig& cfg) {
  RunEntry e;
  e.scenario = r.outputs.meta.scenario;
  e.mode = r.outputs.meta.mode;
  e.repetition = r.outputs.meta.repetition;
  e.seed = r.outputs.meta.seed;
  e.metrics = r.metrics;
  for (const auto& [d, alerts] : r.alerts) {
    e.alert_count += alerts.size();
    if (d != ids::Detector::stat) continue;
    for (const auto& a : alerts) {
      if (a.label != "STAT_POWER") continue;
      const bool tp = std::any_of(r.outputs.truth.begin(), r.outputs.truth.end(), [&](const TruthEvent& t) {
        return ids::alert_matches(a, t, cfg.ids.tolerance_s, cfg.ids.mapping);
      });
      if (tp) ++e.stat_power_tp[static_cast<std::size_t>(a.severity)];
    }
  }
  return e;
}

RunEntry evaluate_dir(const fs::path& dir) {
  const auto cfg = run_config(dir);
  RunResult r;
  r.outputs = capture::read_run(dir);
  std::vector<ids::Alert> all;
  for (auto d : all_detectors()) {
    const fs::path file = alerts_file(dir, d);
    std::vector<ids::Alert> alerts;
    if (fs::exists(file)) {
      alerts = ids::read_alerts(file);
    } else {
      alerts = detect(r.outputs, d, cfg);
      ids::write_alerts(alerts, file);
    }
    all.insert(all.end(), alerts.begin(), alerts.end());
    r.alerts[d] = std::move(alerts);
  }
  r.metrics = ids::evaluate(all, r.outputs.truth, cfg.ids.tolerance_s, cfg.ids.mapping, all_detectors());
  write_text(dir / "metrics.csv", ids::metrics_csv(r.metrics));
  return make_entry(r, cfg);
}

Report build_report(std::vector<RunEntry> runs) {
  Report r;
  r.runs = std::move(runs);
  std::stable_sort(r.runs.begin(), r.runs.end(), [](const RunEntry& a, const RunEntry& b) {
    return std::tie(a.scenario, a.mode, a.repetition) < std::tie(b.scenario, b.mode, b.repetition);
  });
  std::vector<ids::Metrics> all;
  for (const auto& e : r.runs) all.push_back(e.metrics);
  r.totals = ids::aggregate(all);
  return r;
}

std::string runs_csv(const Report& r) {
  std::string out = "scenario,mode,repetition,seed,detector,label,tp,fp,precision,recall,latency_s\n";
  for (const auto& e : r.runs)
    for (const auto& row : e.metrics.rows) {
      out += e.scenario + "," + net::to_string(e.mode) + "," + std::to_string(e.repetition) + "," +
             std::to_string(e.seed) + "," + row.detector + "," + row.label + "," + std::to_string(row.tp) + "," +
             std::to_string(row.fp) + "," + fixed(row.precision()) + "," + fixed(row.recall()) + "," +
             fixed(row.latency()) + "\n";
    }
  return out;
}

namespace {

struct Spread {
  std::vector<double> values;
  std::string text() const {
    if (values.empty()) return "n/a";
    double sum = 0;
    for (double v : values) sum += v;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.3f [%.3f, %.3f]", sum / static_cast<double>(values.size()), *lo, *hi);
    return buf;
  }
};

}  // namespace

std::string summary_text(const Report& r) {
  std::ostringstream s;
  s << "runs: " << r.runs.size() << "\n\n";
  s << "per scenario and mode, detector totals: mean [min, max] over repetitions\n";

  std::map<std::pair<std::string, std::string>, std::vector<const RunEntry*>> groups;
  for (const auto& e : r.runs) groups[{e.scenario, net::to_string(e.mode)}].push_back(&e);

  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-5s %-10s %-26s %-26s %-26s %s\n", "scenario", "mode", "detector", "alerts",
                "precision", "recall", "latency_s");
  s << line;
  for (const auto& [key, entries] : groups) {
    for (auto d : all_detectors()) {
      Spread alerts, precision, recall, latency;
      for (const auto* e : entries) {
        const auto* row = e->metrics.find(ids::to_string(d), "all");
        if (!row) continue;
        alerts.values.push_back(static_cast<double>(row->tp + row->fp));
        if (auto v = row->precision()) precision.values.push_back(*v);
        if (auto v = row->recall()) recall.values.push_back(*v);
        if (auto v = row->latency()) latency.values.push_back(*v);
      }
      std::snprintf(line, sizeof line, "%-22s %-5s %-10s %-26s %-26s %-26s %s\n", key.first.c_str(),
                    key.second.c_str(), ids::to_string(d), alerts.text().c_str(), precision.text().c_str(),
                    recall.text().c_str(), latency.text().c_str());
      s << line;
    }
  }

  s << "\nSTAT_POWER true positives by severity (low/medium/high)\n";
  std::map<std::string, std::map<std::string, std::array<std::size_t, 3>>> sev;
  for (const auto& e : r.runs) {
    auto& cell = sev[e.scenario][net::to_string(e.mode)];
    for (std::size_t i = 0; i < 3; ++i) cell[i] += e.stat_power_tp[i];
  }
  std::snprintf(line, sizeof line, "%-22s %-16s %-16s\n", "scenario", "twin", "lab");
  s << line;
  for (const auto& [scenario, modes] : sev) {
    auto cell = [&](const char* m) {
      auto it = modes.find(m);
      if (it == modes.end()) return std::string("-");
      return std::to_string(it->second[0]) + "/" + std::to_string(it->second[1]) + "/" + std::to_string(it->second[2]);
    };
    std::snprintf(line, sizeof line, "%-22s %-16s %-16s\n", scenario.c_str(), cell("twin").c_str(), cell("lab").c_str());
    s << line;
  }
  return s.str();
}

void write_report(const Report& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "metrics.csv", ids::metrics_csv(r.totals));
  write_text(dir / "runs.csv", runs_csv(r));
  write_text(dir / "summary.txt", summary_text(r));
}

Report run_matrix(const config::ScenarioConfig& cfg, const fs::path& out, const std::vector<net::Mode>& modes) {
  cfg.validate();
  struct Job {
    net::Mode mode;
    int rep;
    fs::path dir;
  };
  std::vector<Job> jobs;
  for (auto mode : modes)
    for (int i = 0; i < cfg.repetitions; ++i)
      jobs.push_back({mode, i, out / cfg.scenario / net::to_string(mode) / ("rep" + std::to_string(i))});

  std::vector<std::future<RunEntry>> futures;
  for (const auto& job : jobs)
    futures.push_back(std::async(std::launch::async, [&cfg, job] {
      const std::uint64_t seed = cfg.sim.seed + static_cast<std::uint64_t>(job.rep);
      try {
        RunResult r = execute(cfg, job.mode, seed, job.rep);
        write_result(r, cfg, job.dir);
        return make_entry(r, cfg);
      } catch (const Error& e) {
        throw Error(e.code(), cfg.scenario + "/" + net::to_string(job.mode) + "/rep" + std::to_string(job.rep) +
                                  " (seed " + std::to_string(seed) + "): " + bare_message(e));
      }
    }));

  std::vector<RunEntry> entries;
  std::exception_ptr failure;
  for (auto& f : futures) {
    try {
      entries.push_back(f.get());
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  Report report = build_report(std::move(entries));
  write_report(report, out);
  return report;
}

}  // namespace scadatwin::harness
