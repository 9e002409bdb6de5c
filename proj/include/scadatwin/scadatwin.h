#ifndef SCADATWIN_H
#define SCADATWIN_H

#include <stddef.h>
#include <stdint.h>

#if defined(SCT_BUILDING_LIBRARY)
#define SCT_API __attribute__((visibility("default")))
#else
#define SCT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sct_status {
  SCT_OK = 0,
  SCT_ERR_INVALID_ARGUMENT,
  SCT_ERR_NO_CONVERGENCE,
  SCT_ERR_MALFORMED_MODEL,
  SCT_ERR_UNKNOWN_ASSET,
  SCT_ERR_CONFIG,
  SCT_ERR_CONNECTION_CLOSED,
  SCT_ERR_REFUSED,
  SCT_ERR_UNREACHABLE,
  SCT_ERR_UNKNOWN_TAP,
  SCT_ERR_INVALID_COMBINATION,
  SCT_ERR_MALFORMED,
  SCT_ERR_AUTH_FAILED,
  SCT_ERR_UNKNOWN_COMMAND,
  SCT_ERR_BLACKLIST_VIOLATION,
  SCT_ERR_SCRIPT_INVARIANT,
  SCT_ERR_UNIMPLEMENTED,
  SCT_ERR_IO,
  SCT_ERR_MALFORMED_TRACE,
  SCT_ERR_INTERNAL
} sct_status;

typedef enum sct_mode { SCT_MODE_TWIN = 0, SCT_MODE_LAB = 1 } sct_mode;

typedef enum sct_detector { SCT_DETECTOR_SIGNATURE = 0, SCT_DETECTOR_SPEC = 1, SCT_DETECTOR_STAT = 2 } sct_detector;

#define SCT_MODES_TWIN 1
#define SCT_MODES_LAB 2
#define SCT_MODES_BOTH 3

typedef struct sct_config sct_config;
typedef struct sct_run sct_run;

typedef struct sct_metric {
  size_t tp;
  size_t fp;
  size_t events;
  size_t detected;
  /* each value is only meaningful when its has_ flag is nonzero */
  int has_precision;
  double precision;
  int has_recall;
  double recall;
  int has_latency;
  double latency_s;
} sct_metric;

SCT_API const char* sct_version(void);
SCT_API const char* sct_status_string(sct_status status);
/* Message of the last failure on the calling thread; empty after success. */
SCT_API const char* sct_last_error(void);
/* Frees strings returned through char** out-parameters. */
SCT_API void sct_string_free(char* s);

SCT_API size_t sct_scenario_count(void);
SCT_API const char* sct_scenario_name(size_t index);

SCT_API sct_status sct_mode_parse(const char* name, sct_mode* out);
SCT_API sct_status sct_detector_parse(const char* name, sct_detector* out);

SCT_API sct_status sct_config_default(const char* scenario, sct_config** out);
SCT_API sct_status sct_config_parse(const char* json_text, sct_config** out);
SCT_API sct_status sct_config_load(const char* path, sct_config** out);
SCT_API sct_status sct_config_save(const sct_config* cfg, const char* path);
SCT_API sct_status sct_config_to_json(const sct_config* cfg, char** out);
SCT_API sct_status sct_config_validate(const sct_config* cfg);
SCT_API sct_status sct_config_set_seed(sct_config* cfg, uint64_t seed);
SCT_API sct_status sct_config_seed(const sct_config* cfg, uint64_t* out);
SCT_API sct_status sct_config_set_repetitions(sct_config* cfg, int repetitions);
SCT_API sct_status sct_config_set_duration(sct_config* cfg, double seconds);
SCT_API sct_status sct_config_scenario(const sct_config* cfg, char** out);
SCT_API void sct_config_free(sct_config* cfg);

/* Simulates one run and runs every detector over it. */
SCT_API sct_status sct_run_execute(const sct_config* cfg, sct_mode mode, uint64_t seed, int repetition,
                                   sct_run** out);
SCT_API sct_status sct_run_write(const sct_run* run, const char* dir);
SCT_API sct_status sct_run_frame_count(const sct_run* run, const char* tap, size_t* out);
SCT_API sct_status sct_run_truth_count(const sct_run* run, size_t* out);
SCT_API sct_status sct_run_alert_count(const sct_run* run, sct_detector detector, const char* label, size_t* out);
/* label "all", an alert label, or "truth:<label>"; SCT_ERR_INVALID_ARGUMENT
   when the row does not exist. */
SCT_API sct_status sct_run_metric(const sct_run* run, sct_detector detector, const char* label, sct_metric* out);
SCT_API sct_status sct_run_metrics_csv(const sct_run* run, char** out);
SCT_API void sct_run_free(sct_run* run);

/* Simulation only: capture, power, truth, meta and config files in dir. */
SCT_API sct_status sct_simulate_to_dir(const sct_config* cfg, sct_mode mode, uint64_t seed, int repetition,
                                       const char* dir);
/* Writes alerts_<detector>.jsonl into the run directory. */
SCT_API sct_status sct_detect_dir(const char* dir, sct_detector detector, size_t* alert_count);
/* Scores a run directory and returns its metrics.csv text. */
SCT_API sct_status sct_evaluate_dir(const char* dir, char** metrics_csv);
/* Each path is a run directory or a tree searched for run directories.
   Writes metrics.csv, runs.csv and summary.txt to out_dir and returns the
   summary text. */
SCT_API sct_status sct_report_dirs(const char* const* paths, size_t count, const char* out_dir, char** summary);
SCT_API sct_status sct_run_matrix(const sct_config* cfg, const char* out_dir, int modes, char** summary);

#ifdef __cplusplus
}
#endif

#endif
