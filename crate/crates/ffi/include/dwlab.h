#ifndef DWLAB_H
#define DWLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a full pipeline run.
typedef enum DwlabOutcome {
  DWLAB_OUTCOME_COMPLETED = 0,
  DWLAB_OUTCOME_BLOWUP = 1,
  DWLAB_OUTCOME_UNDERFLOW_CAPPED = 2,
} DwlabOutcome;

// Result codes shared by all entry points.
typedef enum DwlabStatus {
  DWLAB_STATUS_OK = 0,
  DWLAB_STATUS_NULL_POINTER = 1,
  DWLAB_STATUS_INVALID_UTF8 = 2,
  // Malformed configuration JSON or schema error.
  DWLAB_STATUS_CONFIG = 3,
  // Well-formed configuration that fails validation.
  DWLAB_STATUS_VALIDATION = 4,
  // The solution exceeded the blow-up ceiling.
  DWLAB_STATUS_BLOWUP = 5,
  // Any other numerical failure (step budget, invalid step).
  DWLAB_STATUS_NUMERIC = 6,
  DWLAB_STATUS_IO = 7,
  DWLAB_STATUS_BUFFER_TOO_SMALL = 8,
  DWLAB_STATUS_PANIC = 9,
} DwlabStatus;

// Opaque simulator handle.
typedef struct DwlabSim DwlabSim;

// Predicted rates of a configuration.
typedef struct DwlabRates {
  double lambda0;
  double lambda1;
  double lambda;
  double eta;
  // Predicted decay exponent `n/4 + λ` of the profile error.
  double exponent;
} DwlabRates;

// Damping quantities at one physical time.
typedef struct DwlabDamping {
  double b;
  double big_b;
  // Similarity time `log(B + 1)`.
  double s;
  double eps;
  double drag;
} DwlabDamping;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next `dwlab_*` call on the same thread.
const char *dwlab_last_error(void);

// Library version as a static NUL-terminated string.
const char *dwlab_version(void);

// Builds a simulator from configuration JSON, with the configured initial
// data at `t = 0`.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
enum DwlabStatus dwlab_sim_new(const char *config_json, struct DwlabSim **out);

// Releases a handle from [`dwlab_sim_new`]. Null is ignored.
//
// # Safety
// `sim` must be null or a live handle not freed before.
void dwlab_sim_free(struct DwlabSim *sim);

// Advances to the physical time matching similarity time `s`.
//
// # Safety
// `sim` must be a live handle.
enum DwlabStatus dwlab_sim_advance_to_s(struct DwlabSim *sim, double s);

// Current physical time, or NaN for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
double dwlab_sim_time(const struct DwlabSim *sim);

// Number of grid samples per field, or 0 for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
size_t dwlab_sim_len(const struct DwlabSim *sim);

// Copies `u` and `u_t` (row-major) into caller buffers of `len` doubles.
// Either buffer may be null to skip it.
//
// # Safety
// `sim` must be a live handle; non-null buffers must hold `len` doubles.
enum DwlabStatus dwlab_sim_copy_state(const struct DwlabSim *sim, double *u, double *p, size_t len);

// Predicted rates for a configuration.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
enum DwlabStatus dwlab_rates_predict(const char *config_json, struct DwlabRates *out);

// Power-law damping `b = μ(1+t)^{-β}` and its derived quantities at `t`.
//
// # Safety
// `out` must be writable.
enum DwlabStatus dwlab_damping(double beta, double mu, double t, struct DwlabDamping *out);

// Physical time reached at similarity time `s`.
//
// # Safety
// `out` must be writable.
enum DwlabStatus dwlab_t_of_s(double beta, double mu, double s, double *out);

// Full pipeline into `out_root/<id>`; `outcome` may be null. A blow-up is
// reported through `outcome` with status `Ok`.
//
// # Safety
// Both strings must be NUL-terminated; `outcome` must be null or writable.
enum DwlabStatus dwlab_run(const char *config_json,
                           const char *out_root,
                           enum DwlabOutcome *outcome);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DWLAB_H */
