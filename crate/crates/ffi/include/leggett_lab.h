#ifndef LEGGETT_LAB_H
#define LEGGETT_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LeggettBranch {
  LEGGETT_BRANCH_PLUS = 0,
  LEGGETT_BRANCH_MINUS = 1,
} LeggettBranch;

typedef enum LeggettStatus {
  LEGGETT_STATUS_OK = 0,
  LEGGETT_STATUS_NULL_POINTER = 1,
  LEGGETT_STATUS_INVALID_ARGUMENT = 2,
  LEGGETT_STATUS_OUT_OF_RANGE = 3,
  LEGGETT_STATUS_PRECONDITION = 4,
  LEGGETT_STATUS_NUMERIC = 5,
  LEGGETT_STATUS_SOUNDNESS = 6,
  LEGGETT_STATUS_IO = 7,
  LEGGETT_STATUS_PANIC = 99,
} LeggettStatus;

/**
 * Opaque settings ensemble.
 */
typedef struct LeggettEnsemble LeggettEnsemble;

/**
 * Opaque `(θ, φ, ψ)` scan.
 */
typedef struct LeggettScan LeggettScan;

typedef struct LeggettOptimum {
  double theta;
  double phi;
  double psi;
  double value;
  double locus_residual;
  /**
   * 0 when the iteration limit was reached first.
   */
  int32_t converged;
} LeggettOptimum;

typedef struct LeggettEvaluation {
  double l_plus;
  double l_minus;
  double lhs_general_plus;
  double lhs_general_minus;
  double bound_general_plus;
  double bound_general_minus;
  double margin_plus;
  double margin_minus;
  double max_abs_alpha;
} LeggettEvaluation;

typedef struct LeggettScanPoint {
  double theta;
  double phi;
  double psi;
  double l_plus;
  double l_minus;
} LeggettScanPoint;

typedef struct LeggettOracleSummary {
  size_t trials;
  size_t failures;
  size_t positive_margins;
  double max_margin;
} LeggettOracleSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *leggett_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *leggett_version(void);

/**
 * `2(√5 + 1)`.
 */
double leggett_max_violation(void);

/**
 * Closed-form GHZ correlator for `n` parties with polar and azimuthal angles.
 */
enum LeggettStatus leggett_ghz_correlation(size_t n,
                                           const double *polar,
                                           const double *azimuth,
                                           double *out);

/**
 * Same correlator by explicit trace against the GHZ density matrix.
 */
enum LeggettStatus leggett_ghz_correlation_bruteforce(size_t n,
                                                      const double *polar,
                                                      const double *azimuth,
                                                      double *out);

/**
 * Closed-form tripartite `L+` and `L−`.
 */
enum LeggettStatus leggett_tripartite_closed(double theta,
                                             double phi,
                                             double psi,
                                             double *l_plus,
                                             double *l_minus);

/**
 * `ψ` on the maximizing locus for `φ`.
 */
enum LeggettStatus leggett_optimal_locus(enum LeggettBranch branch, double phi, double *psi);

/**
 * Multi-start maximization of `L±` with default grid seeding.
 */
enum LeggettStatus leggett_maximize(enum LeggettBranch branch,
                                    double tolerance,
                                    struct LeggettOptimum *out);

/**
 * Standard tripartite arrangement, party 1 designated.
 */
enum LeggettStatus leggett_ensemble_fig1(double theta,
                                         double phi,
                                         double psi,
                                         struct LeggettEnsemble **out);

/**
 * Standard arrangement for `n` parties with a 1-based designated party.
 */
enum LeggettStatus leggett_ensemble_standard(size_t n,
                                             size_t designated,
                                             double theta,
                                             double phi,
                                             double psi,
                                             struct LeggettEnsemble **out);

/**
 * Parses the JSON form produced by [`leggett_ensemble_to_json`].
 */
enum LeggettStatus leggett_ensemble_from_json(const char *json, struct LeggettEnsemble **out);

/**
 * JSON text of an ensemble; release with [`leggett_string_free`].
 */
enum LeggettStatus leggett_ensemble_to_json(const struct LeggettEnsemble *ensemble, char **out);

enum LeggettStatus leggett_ensemble_parties(const struct LeggettEnsemble *ensemble, size_t *out);

/**
 * Frame and pair-angle checks; `passed` is 1 or 0.
 */
enum LeggettStatus leggett_ensemble_validate(const struct LeggettEnsemble *ensemble,
                                             int32_t *passed,
                                             double *max_residual);

/**
 * Evaluates the inequalities with quantum GHZ correlators (explicit trace).
 */
enum LeggettStatus leggett_ensemble_evaluate_ghz(const struct LeggettEnsemble *ensemble,
                                                 struct LeggettEvaluation *out);

void leggett_ensemble_free(struct LeggettEnsemble *ensemble);

void leggett_string_free(char *s);

/**
 * Grid scan over θ ∈ [0, π], φ, ψ ∈ [0, 2π].
 */
enum LeggettStatus leggett_scan_new(size_t theta_steps,
                                    size_t phi_steps,
                                    size_t psi_steps,
                                    struct LeggettScan **out);

enum LeggettStatus leggett_scan_len(const struct LeggettScan *scan, size_t *out);

enum LeggettStatus leggett_scan_point(const struct LeggettScan *scan,
                                      size_t index,
                                      struct LeggettScanPoint *out);

/**
 * Index of the largest value on `branch`.
 */
enum LeggettStatus leggett_scan_argmax(const struct LeggettScan *scan,
                                       enum LeggettBranch branch,
                                       size_t *index);

/**
 * Writes the versioned CSV to `path`.
 */
enum LeggettStatus leggett_scan_write_csv(const struct LeggettScan *scan, const char *path);

void leggett_scan_free(struct LeggettScan *scan);

/**
 * Monte Carlo soundness run of the nonlocal-realistic model with the
 * default sampler. Returns `Soundness` if any trial failed; `out` is
 * filled either way.
 */
enum LeggettStatus leggett_oracle_run(uint64_t seed,
                                      size_t trials,
                                      size_t n_min,
                                      size_t n_max,
                                      size_t max_atoms,
                                      struct LeggettOracleSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEGGETT_LAB_H */
