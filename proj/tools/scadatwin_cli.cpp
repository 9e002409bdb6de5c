#include <cstdio>
#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scadatwin/scadatwin.h"

namespace {

struct RuntimeFailure {
  sct_status status;
};

void check(sct_status s) {
  if (s != SCT_OK) throw RuntimeFailure{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  sct_string_free(s);
  return out;
}

std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (size_t i = 0; i < sct_scenario_count(); ++i) names.emplace_back(sct_scenario_name(i));
  return names;
}

// Owns a config handle for the duration of one command.
class Config {
 public:
  Config(const std::string& scenario, const std::string& file) {
    if (!file.empty())
      check(sct_config_load(file.c_str(), &cfg_));
    else
      check(sct_config_default(scenario.c_str(), &cfg_));
  }
  ~Config() { sct_config_free(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  sct_config* get() { return cfg_; }

 private:
  sct_config* cfg_ = nullptr;
};

struct ScenarioOptions {
  std::string scenario = "baseline";
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int reps = 1;
  double duration = 0;
  std::string out;
};

void add_scenario_options(CLI::App* cmd, ScenarioOptions& o, const std::vector<std::string>& names) {
  auto* scenario = cmd->add_option("--scenario", o.scenario, "builtin scenario")->check(CLI::IsMember(names));
  cmd->add_option("--config", o.config, "scenario configuration file (JSON)")->check(CLI::ExistingFile)->excludes(scenario);
  cmd->add_option("--seed", o.seed, "base seed; repetition i uses seed + i");
  cmd->add_option("--duration", o.duration, "simulated seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory")->required();
}

void apply(Config& cfg, const ScenarioOptions& o, bool seed_given) {
  if (seed_given) check(sct_config_set_seed(cfg.get(), o.seed));
  if (o.duration > 0) check(sct_config_set_duration(cfg.get(), o.duration));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin SCADA testbed: attack scenarios, captures and intrusion detection"};
  app.require_subcommand(1);
  const auto names = scenario_names();

  ScenarioOptions run_opts;
  std::string run_mode = "twin";
  auto* run = app.add_subcommand("run", "simulate a scenario and write its run files");
  add_scenario_options(run, run_opts, names);
  run->add_option("--mode", run_mode, "twin or lab")->check(CLI::IsMember({"twin", "lab"}));
  run->add_option("--reps", run_opts.reps, "repetitions (rep<i> subdirectories when more than one)")
      ->check(CLI::Range(1, 1000));

  ScenarioOptions matrix_opts;
  matrix_opts.reps = 0;
  std::string matrix_modes = "both";
  auto* matrix = app.add_subcommand("matrix", "run scenario x modes x repetitions with detection and report");
  add_scenario_options(matrix, matrix_opts, names);
  matrix->add_option("--modes", matrix_modes, "twin, lab or both")->check(CLI::IsMember({"twin", "lab", "both"}));
  matrix->add_option("--reps", matrix_opts.reps, "repetitions (default from the configuration)")
      ->check(CLI::Range(1, 1000));

  std::string detect_ids, detect_run;
  auto* detect = app.add_subcommand("detect", "run one detector over a run directory");
  detect->add_option("--ids", detect_ids, "signature, spec or stat")
      ->required()
      ->check(CLI::IsMember({"signature", "spec", "stat"}));
  detect->add_option("--run", detect_run, "run directory")->required()->check(CLI::ExistingDirectory);

  std::string evaluate_run;
  auto* evaluate = app.add_subcommand("evaluate", "score a run's alerts against its ground truth");
  evaluate->add_option("--run", evaluate_run, "run directory")->required()->check(CLI::ExistingDirectory);

  std::string report_out;
  std::vector<std::string> report_runs;
  auto* report = app.add_subcommand("report", "aggregate run directories into metrics.csv and summary.txt");
  report->add_option("--out", report_out, "report directory (searched for runs when none are given)")->required();
  report->add_option("runs", report_runs, "run directories or trees containing them");

  auto* scenarios = app.add_subcommand("scenarios", "list builtin scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (scenarios->parsed()) {
      for (const auto& n : names) std::printf("%s\n", n.c_str());
    } else if (run->parsed()) {
      Config cfg(run_opts.scenario, run_opts.config);
      apply(cfg, run_opts, run->count("--seed") > 0);
      sct_mode mode;
      check(sct_mode_parse(run_mode.c_str(), &mode));
      std::uint64_t seed = 0;
      check(sct_config_seed(cfg.get(), &seed));
      for (int i = 0; i < run_opts.reps; ++i) {
        std::string dir = run_opts.reps == 1 ? run_opts.out : run_opts.out + "/rep" + std::to_string(i);
        check(sct_simulate_to_dir(cfg.get(), mode, seed + static_cast<std::uint64_t>(i), i, dir.c_str()));
        std::printf("%s\n", dir.c_str());
      }
    } else if (matrix->parsed()) {
      Config cfg(matrix_opts.scenario, matrix_opts.config);
      apply(cfg, matrix_opts, matrix->count("--seed") > 0);
      if (matrix_opts.reps > 0) check(sct_config_set_repetitions(cfg.get(), matrix_opts.reps));
      const int modes = matrix_modes == "twin" ? SCT_MODES_TWIN : matrix_modes == "lab" ? SCT_MODES_LAB : SCT_MODES_BOTH;
      char* summary = nullptr;
      check(sct_run_matrix(cfg.get(), matrix_opts.out.c_str(), modes, &summary));
      std::printf("%s", take(summary).c_str());
    } else if (detect->parsed()) {
      sct_detector d;
      check(sct_detector_parse(detect_ids.c_str(), &d));
      size_t n = 0;
      check(sct_detect_dir(detect_run.c_str(), d, &n));
      std::printf("%zu alerts written to %s/alerts_%s.jsonl\n", n, detect_run.c_str(), detect_ids.c_str());
    } else if (evaluate->parsed()) {
      char* csv = nullptr;
      check(sct_evaluate_dir(evaluate_run.c_str(), &csv));
      std::printf("%s", take(csv).c_str());
    } else if (report->parsed()) {
      std::vector<const char*> paths;
      for (const auto& r : report_runs) paths.push_back(r.c_str());
      char* summary = nullptr;
      check(sct_report_dirs(paths.data(), paths.size(), report_out.c_str(), &summary));
      std::printf("%s", take(summary).c_str());
    }
  } catch (const RuntimeFailure& f) {
    std::fprintf(stderr, "error: %s (%s)\n", sct_last_error(), sct_status_string(f.status));
    return 1;
  }
  return 0;
}
