#ifndef DMMF_H
#define DMMF_H

/* Generated by cbindgen from the dmmf-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DMMF_OK 0

#define DMMF_ERR_INVALID_ARGUMENT 1

#define DMMF_ERR_PARSE 2

#define DMMF_ERR_RUN 3

/**
 * Per-agent statistic selector for [`dmmf_summary_stat`].
 */
typedef enum DmmfStat {
  /**
   * Mean per-round utility.
   */
  DmmfStat_UtilMean = 0,
  /**
   * Standard error of the per-round utility mean.
   */
  DmmfStat_UtilSe = 1,
  /**
   * Mean win count.
   */
  DmmfStat_WinsMean = 2,
  /**
   * Mean blocked-round count.
   */
  DmmfStat_BlockedMean = 3,
} DmmfStat;

/**
 * Opaque parsed distribution.
 */
typedef struct DmmfDist DmmfDist;

/**
 * Opaque replication summary.
 */
typedef struct DmmfSummary DmmfSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be null.
 */
size_t dmmf_last_error(char *buf, size_t cap);

/**
 * General robustness guarantee coefficient (clamped at zero).
 */
int dmmf_guarantee_general(double alpha, double beta, double gamma, double *out);

/**
 * Reusable-resource guarantee `min{alpha/(beta r), 1 - (1-alpha)/r}`.
 */
int dmmf_guarantee_mult(double alpha, double beta, double r, double *out);

/**
 * Tuned cap parameter and its coefficient.
 */
int dmmf_tuned_r(double alpha, double beta, double *out_r, double *out_coeff);

/**
 * Correlated-values impossibility coefficient.
 */
int dmmf_impossibility_markov(double alpha, double gamma, double *out);

/**
 * Reusable-resource impossibility: full utility upper bound.
 */
int dmmf_impossibility_mult(double alpha,
                            double r,
                            uint32_t k_max,
                            double v_star_beta,
                            uint64_t horizon,
                            double *out);

/**
 * Parses a distribution spec string (same grammar as the CLI `ideal`
 * subcommand) into an opaque handle.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` a valid pointer.
 */
int dmmf_dist_parse(const char *spec, struct DmmfDist **out);

/**
 * Frees a distribution handle.
 *
 * # Safety
 * `dist` must come from [`dmmf_dist_parse`] (or be null).
 */
void dmmf_dist_free(struct DmmfDist *dist);

/**
 * Ideal utility `v*(beta)` of a parsed distribution. For single-round value
 * laws, also reports the optimal threshold policy through `out_threshold` /
 * `out_atom_prob` (both may be null); for demand laws those outputs are NaN.
 *
 * # Safety
 * `dist` must be a live handle from [`dmmf_dist_parse`].
 */
int dmmf_ideal(const struct DmmfDist *dist,
               double beta,
               double *out_value,
               double *out_threshold,
               double *out_atom_prob);

/**
 * Runs an experiment described by TOML text and returns a summary handle.
 * `seed_override < 0` keeps the config's master seed; `reps_override == 0`
 * keeps the config's replication count; `jobs == 0` uses all cores.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` a valid pointer.
 */
int dmmf_run_simulation(const char *config_toml,
                        int64_t seed_override,
                        uint32_t reps_override,
                        uint32_t jobs,
                        struct DmmfSummary **out);

/**
 * Frees a summary handle.
 *
 * # Safety
 * `summary` must come from [`dmmf_run_simulation`] (or be null).
 */
void dmmf_summary_free(struct DmmfSummary *summary);

/**
 * Number of agents in a summary.
 *
 * # Safety
 * `summary` must be a live handle.
 */
size_t dmmf_summary_num_agents(const struct DmmfSummary *summary);

/**
 * Pathwise invariant violations across all replications (must be zero).
 *
 * # Safety
 * `summary` must be a live handle.
 */
uint64_t dmmf_summary_violations(const struct DmmfSummary *summary);

/**
 * Reads one per-agent statistic from a summary.
 *
 * # Safety
 * `summary` must be a live handle; `out` a valid pointer.
 */
int dmmf_summary_stat(const struct DmmfSummary *summary,
                      size_t agent,
                      enum DmmfStat stat,
                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMMF_H */
