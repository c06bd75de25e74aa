#ifndef SDDHOPF_H
#define SDDHOPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which report `sdd_report_json` produces.
 */
typedef enum SddReport {
  SDD_REPORT_EQUILIBRIUM = 0,
  SDD_REPORT_STABILITY = 1,
  SDD_REPORT_NORMAL_FORM = 2,
  SDD_REPORT_SIMULATE = 3,
  SDD_REPORT_SWEEP = 4,
} SddReport;

/**
 * Result code of every call. Values 0 to 4 match the command-line exit codes.
 */
typedef enum SddStatus {
  SDD_STATUS_OK = 0,
  SDD_STATUS_CONFIG = 1,
  SDD_STATUS_SOLVER = 2,
  SDD_STATUS_RESONANCE = 3,
  SDD_STATUS_INTEGRATION = 4,
  SDD_STATUS_NULL_POINTER = 5,
  SDD_STATUS_PANIC = 6,
} SddStatus;

/**
 * Run configuration handle.
 */
typedef struct SddModel SddModel;

/**
 * Simulation result handle.
 */
typedef struct SddTrajectory SddTrajectory;

typedef struct SddEquilibrium {
  double r_star;
  double xi_star;
  double f1;
  double f2;
  double f3;
  double g1;
  double g2;
  double g3;
} SddEquilibrium;

typedef struct SddHopf {
  double eps0;
  double omega;
  double l;
  double dalpha_deps;
} SddHopf;

/**
 * `direction`: -1 supercritical, 1 subcritical, 0 degenerate. `c0` is NaN
 * when `Re kappa3` has no sign change.
 */
typedef struct SddNormalForm {
  double c;
  double kappa1_re;
  double kappa1_im;
  double kappa3_re;
  double kappa3_im;
  int32_t direction;
  double c0;
} SddNormalForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 if there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t sdd_last_error(char *buf, size_t len);

/**
 * Reference Hes1 model with the given `c` and `eps`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SddStatus sdd_model_hes1(double c, double eps, struct SddModel **out);

/**
 * Model from a JSON run configuration (the command-line config format).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SddStatus sdd_model_from_json(const char *json, struct SddModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void sdd_model_free(struct SddModel *model);

/**
 * Sets `c` and `eps` to plain values.
 *
 * # Safety
 * `model` must be a valid handle.
 */
enum SddStatus sdd_model_set(struct SddModel *model, double c, double eps);

/**
 * # Safety
 * `model` must be a valid handle and `out` a valid pointer.
 */
enum SddStatus sdd_equilibrium(const struct SddModel *model, struct SddEquilibrium *out);

/**
 * First Hopf point. Fails with `SDD_STATUS_SOLVER` when the steady state is
 * stable for every delay.
 *
 * # Safety
 * `model` must be a valid handle and `out` a valid pointer.
 */
enum SddStatus sdd_hopf(const struct SddModel *model, struct SddHopf *out);

/**
 * Normal form at the model's `c`.
 *
 * # Safety
 * `model` must be a valid handle and `out` a valid pointer.
 */
enum SddStatus sdd_normal_form(const struct SddModel *model, struct SddNormalForm *out);

/**
 * Runs the model's simulation settings. A run that stops early still
 * yields a trajectory; check `sdd_trajectory_completed`.
 *
 * # Safety
 * `model` must be a valid handle and `out` a valid pointer.
 */
enum SddStatus sdd_simulate(const struct SddModel *model, struct SddTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle from this library, not yet freed.
 */
void sdd_trajectory_free(struct SddTrajectory *traj);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a valid handle.
 */
size_t sdd_trajectory_len(const struct SddTrajectory *traj);

/**
 * 1 if the run reached its end time, 0 otherwise.
 *
 * # Safety
 * `traj` must be null or a valid handle.
 */
int32_t sdd_trajectory_completed(const struct SddTrajectory *traj);

/**
 * Copies up to `cap` samples into the four column buffers (time, first and
 * second state component, delay). Any buffer may be null to skip it.
 * `written` receives the number of rows copied.
 *
 * # Safety
 * Non-null buffers must be valid for `cap` doubles; `written` must be valid.
 */
enum SddStatus sdd_trajectory_copy(const struct SddTrajectory *traj,
                                   double *t,
                                   double *x,
                                   double *y,
                                   double *delay,
                                   size_t cap,
                                   size_t *written);

/**
 * The command-line JSON report for the model; free the string with
 * `sdd_string_free`.
 *
 * # Safety
 * `model` must be a valid handle and `out` a valid pointer.
 */
enum SddStatus sdd_report_json(const struct SddModel *model, enum SddReport kind, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void sdd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDDHOPF_H */
