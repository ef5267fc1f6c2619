#ifndef DMRAC_H
#define DMRAC_H

/* Generated by cbindgen from the dmrac-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call results. Zero is success; everything else maps one error class.
 */
typedef enum DmracStatus {
  DMRAC_STATUS_OK = 0,
  DMRAC_STATUS_NULL_POINTER = 1,
  DMRAC_STATUS_INVALID_ARGUMENT = 2,
  DMRAC_STATUS_PARSE_ERROR = 3,
  DMRAC_STATUS_VALIDATION_ERROR = 4,
  DMRAC_STATUS_NUMERIC_ERROR = 5,
  DMRAC_STATUS_DOMAIN_EXIT = 6,
  DMRAC_STATUS_IO_ERROR = 7,
  DMRAC_STATUS_UTF8_ERROR = 8,
  DMRAC_STATUS_PANIC = 9,
} DmracStatus;

/**
 * Which reference task a simulation follows.
 */
typedef enum DmracTask {
  DMRAC_TASK_TRAIN = 0,
  DMRAC_TASK_EVAL = 1,
} DmracTask;

/**
 * Opaque network handle.
 */
typedef struct DmracNetwork DmracNetwork;

/**
 * Opaque finished-run handle.
 */
typedef struct DmracRun DmracRun;

/**
 * Opaque scenario handle.
 */
typedef struct DmracScenario DmracScenario;

/**
 * Scalar episode statistics, mirrored from the run summary.
 */
typedef struct DmracSummary {
  double rms_error_full;
  double rms_error_final_quarter;
  double max_error_norm;
  double uub_radius;
  double eps_bar;
  /**
   * 0 when eps_bar came from configuration, 1 when estimated from the
   * run itself.
   */
  int32_t eps_bar_empirical;
  double fraction_inside_radius;
  uint64_t final_buffer_len;
  uint64_t admitted;
  uint64_t rejected;
  uint64_t train_rounds;
} DmracSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or null when none exists.
 * The caller owns the returned string and must release it with
 * [`dmrac_string_free`].
 */
char *dmrac_last_error_message(void);

/**
 * Releases a string allocated by this library. Null is accepted.
 *
 * # Safety
 * `s` must have been returned by a dmrac function and not yet freed.
 */
void dmrac_string_free(char *s);

/**
 * Loads a scenario by built-in name or file path.
 *
 * # Safety
 * `name_or_path` must be a valid NUL-terminated string; `out` must point
 * to writable storage for one pointer.
 */
enum DmracStatus dmrac_scenario_load(const char *name_or_path, struct DmracScenario **out);

/**
 * Parses a scenario document from text.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` must point to
 * writable storage for one pointer.
 */
enum DmracStatus dmrac_scenario_parse(const char *text, struct DmracScenario **out);

/**
 * Canonical text form of a scenario; release with `dmrac_string_free`.
 *
 * # Safety
 * `scenario` must be a live handle from this library.
 */
char *dmrac_scenario_serialize(const struct DmracScenario *scenario);

/**
 * Overrides the run mode (`dmrac-adaptive`, `dmrac-frozen`,
 * `mrac-fixed-basis`, `no-adaptation`).
 *
 * # Safety
 * `scenario` must be a live handle; `mode` a valid string.
 */
enum DmracStatus dmrac_scenario_set_mode(struct DmracScenario *scenario, const char *mode);

/**
 * Overrides the run seed.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum DmracStatus dmrac_scenario_set_seed(struct DmracScenario *scenario, uint64_t seed);

/**
 * Releases a scenario handle. Null is accepted.
 *
 * # Safety
 * `scenario` must come from this library and not be freed twice.
 */
void dmrac_scenario_free(struct DmracScenario *scenario);

/**
 * Runs a scenario. `net` may be null except in frozen mode; it is cloned,
 * not consumed.
 *
 * # Safety
 * Handles must be live; `out` must point to writable storage.
 */
enum DmracStatus dmrac_simulate(const struct DmracScenario *scenario,
                                enum DmracTask task,
                                const struct DmracNetwork *net,
                                struct DmracRun **out);

/**
 * Number of trace samples in a finished run.
 *
 * # Safety
 * `run` must be a live handle.
 */
uintptr_t dmrac_run_trace_len(const struct DmracRun *run);

/**
 * Full trace in CSV form; release with `dmrac_string_free`.
 *
 * # Safety
 * `run` must be a live handle.
 */
char *dmrac_run_trace_csv(const struct DmracRun *run);

/**
 * Episode statistics for a finished run of a scenario.
 *
 * # Safety
 * Handles must be live; `out` must point to writable storage for one
 * `DmracSummary`.
 */
enum DmracStatus dmrac_run_summary(const struct DmracRun *run,
                                   const struct DmracScenario *scenario,
                                   struct DmracSummary *out);

/**
 * Clones the trained network out of a finished adaptive run.
 *
 * # Safety
 * `run` must be live; `out` must point to writable storage.
 */
enum DmracStatus dmrac_run_network(const struct DmracRun *run, struct DmracNetwork **out);

/**
 * Releases a run handle. Null is accepted.
 *
 * # Safety
 * `run` must come from this library and not be freed twice.
 */
void dmrac_run_free(struct DmracRun *run);

/**
 * Loads a network weight file.
 *
 * # Safety
 * `path` must be a valid string; `out` writable.
 */
enum DmracStatus dmrac_network_load(const char *path, struct DmracNetwork **out);

/**
 * Writes a network weight file.
 *
 * # Safety
 * `net` must be live; `path` a valid string.
 */
enum DmracStatus dmrac_network_save(const struct DmracNetwork *net, const char *path);

/**
 * Releases a network handle. Null is accepted.
 *
 * # Safety
 * `net` must come from this library and not be freed twice.
 */
void dmrac_network_free(struct DmracNetwork *net);

/**
 * Ultimate-bound radius for a scenario's Lyapunov pair at a given
 * approximation-error bound.
 *
 * # Safety
 * `scenario` must be live; `out` writable.
 */
enum DmracStatus dmrac_uub_radius(const struct DmracScenario *scenario,
                                  double eps_bar,
                                  double *out);

/**
 * Generalization tolerance for a scenario at a given error norm.
 *
 * # Safety
 * `scenario` must be live; `out` writable.
 */
enum DmracStatus dmrac_generalization_tolerance(const struct DmracScenario *scenario,
                                                double e_norm,
                                                double *out);

/**
 * Training sample-complexity bound.
 *
 * # Safety
 * `out` must point to writable storage.
 */
enum DmracStatus dmrac_sample_complexity(double eps,
                                         double delta,
                                         uint64_t k_bits,
                                         uint64_t n_weights,
                                         uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMRAC_H */
