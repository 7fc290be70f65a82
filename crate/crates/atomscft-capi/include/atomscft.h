#ifndef ATOMSCFT_H
#define ATOMSCFT_H

/* Generated by cbindgen from atomscft-capi; edit the Rust source, not this file. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum AtomscftStatus {
  /**
   * Success.
   */
  AtomscftStatus_Ok = 0,
  /**
   * A required pointer argument was NULL.
   */
  AtomscftStatus_NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  AtomscftStatus_InvalidUtf8 = 2,
  /**
   * Key or value rejected by the configuration schema.
   */
  AtomscftStatus_InvalidConfig = 3,
  /**
   * The solver could not produce a result (bad setup, linear algebra
   * failure, or an internal panic). Non-convergence is NOT a failure;
   * check `atomscft_result_converged`.
   */
  AtomscftStatus_RunFailed = 4,
  /**
   * Pair index past the end of the result.
   */
  AtomscftStatus_OutOfRange = 5,
} AtomscftStatus;

/**
 * Run configuration handle. Starts at the library defaults; set fields by
 * key with `atomscft_config_set`.
 */
typedef struct AtomscftConfig AtomscftConfig;

/**
 * A finished run: converged state, energy table, comparisons.
 */
typedef struct AtomscftResult AtomscftResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, as a NUL-terminated
 * string. Empty when the last call succeeded. The pointer stays valid until
 * the next call into the library from the same thread.
 */
const char *atomscft_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *atomscft_version(void);

/**
 * New configuration with default parameters (desk-scale basis, beta = 50).
 * Free with `atomscft_config_free`.
 */
struct AtomscftConfig *atomscft_config_new(void);

/**
 * Release a configuration. NULL is a no-op.
 *
 * # Safety
 * `cfg` must be a pointer from `atomscft_config_new` that has not been
 * freed, or NULL.
 */
void atomscft_config_free(struct AtomscftConfig *cfg);

/**
 * Set one configuration field. Keys and values use the same schema as the
 * CLI's config files (`element`, `beta`, `g0`, `mixing`, `tol`, `max_iter`,
 * `basis`, `grid`, ...); see the README for the full list.
 *
 * # Safety
 * `cfg` must be a live configuration handle; `key` and `value` must be
 * NUL-terminated strings.
 */
enum AtomscftStatus atomscft_config_set(struct AtomscftConfig *cfg,
                                        const char *key,
                                        const char *value);

/**
 * Render the configuration in the config-file syntax. Free the returned
 * string with `atomscft_string_free`; NULL input yields NULL.
 *
 * # Safety
 * `cfg` must be a live configuration handle or NULL.
 */
char *atomscft_config_to_text(const struct AtomscftConfig *cfg);

/**
 * Run the solver to convergence (or the iteration cap) and hand back a
 * result handle in `*out`. The run is synchronous and can take seconds to
 * minutes at desk scale. Non-convergence still produces a result; inspect
 * `atomscft_result_converged`. Free the result with `atomscft_result_free`.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `out` a valid location to
 * store the result pointer.
 */
enum AtomscftStatus atomscft_run(const struct AtomscftConfig *cfg, struct AtomscftResult **out);

/**
 * Release a result. NULL is a no-op.
 *
 * # Safety
 * `res` must be a pointer from `atomscft_run` that has not been freed, or
 * NULL.
 */
void atomscft_result_free(struct AtomscftResult *res);

/**
 * 1 if the run met its tolerance, 0 if it hit the iteration cap (or the
 * handle is NULL).
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
int atomscft_result_converged(const struct AtomscftResult *res);

/**
 * Number of SCF iterations performed.
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
uint32_t atomscft_result_iterations(const struct AtomscftResult *res);

/**
 * Final max-abs density-coefficient change.
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
double atomscft_result_residual(const struct AtomscftResult *res);

/**
 * Total free energy in Hartree (negative for bound atoms).
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
double atomscft_result_free_energy(const struct AtomscftResult *res);

/**
 * Binding energy in Hartree (positive for bound atoms).
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
double atomscft_result_binding(const struct AtomscftResult *res);

/**
 * Total kinetic energy in Hartree.
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
double atomscft_result_kinetic(const struct AtomscftResult *res);

/**
 * Lieb-Thirring constraint ratio (<= 1 for valid densities).
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
double atomscft_result_ratio1(const struct AtomscftResult *res);

/**
 * von Weizsacker constraint ratio (<= 1, = 1 for a single pair).
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
double atomscft_result_ratio2(const struct AtomscftResult *res);

/**
 * Number of electron pairs (ceil(Z/2)).
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
size_t atomscft_result_pair_count(const struct AtomscftResult *res);

/**
 * Free energy of one pair, indexed most bound first (matching the report).
 *
 * # Safety
 * `res` must be a live result handle; `out` must be a valid f64 location.
 */
enum AtomscftStatus atomscft_result_pair_free_energy(const struct AtomscftResult *res,
                                                     size_t pair,
                                                     double *out);

/**
 * Electron count of one pair (1 or 2), indexed most bound first.
 *
 * # Safety
 * `res` must be a live result handle; `out` must be a valid u32 location.
 */
enum AtomscftStatus atomscft_result_pair_electrons(const struct AtomscftResult *res,
                                                   size_t pair,
                                                   uint32_t *out);

/**
 * Evaluate a converged pair density at a spherical-coordinate point
 * (Bohr radii, radians). `pair` indexes most bound first; pass -1 for the
 * total density. Densities come from the thermal eigenstate expansion and
 * are nonnegative.
 *
 * # Safety
 * `res` must be a live result handle; `out` must be a valid f64 location.
 */
enum AtomscftStatus atomscft_result_density_at(const struct AtomscftResult *res,
                                               ptrdiff_t pair,
                                               double r,
                                               double theta,
                                               double phi,
                                               double *out);

/**
 * Full run report as pretty-printed JSON, the same document the CLI writes
 * to `report.json`. Free with `atomscft_string_free`; NULL on failure.
 *
 * # Safety
 * `res` must be a live result handle or NULL.
 */
char *atomscft_result_report_json(const struct AtomscftResult *res);

/**
 * Release a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must be a string returned by this library that has not been freed,
 * or NULL.
 */
void atomscft_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATOMSCFT_H */
