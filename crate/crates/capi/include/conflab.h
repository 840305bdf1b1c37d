#ifndef CONFLAB_H
#define CONFLAB_H

/* Generated by cbindgen from the conflab-capi crate. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call. `Ok` is zero; anything
 * else leaves a description in `conflab_last_error`.
 */
typedef enum ConflabStatus {
  ConflabStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  ConflabStatus_NullArgument = 1,
  /**
   * An argument was outside its domain (bad coordinate, empty list,
   * malformed grid, unknown name).
   */
  ConflabStatus_InvalidArgument = 2,
  /**
   * A construction condition failed (for example a non-telescoping
   * loop sum).
   */
  ConflabStatus_ConstraintViolated = 3,
  /**
   * The orbit does not close at the requested period.
   */
  ConflabStatus_NotPeriodic = 4,
  /**
   * The requested computation exceeds the precision mode.
   */
  ConflabStatus_PrecisionExceeded = 5,
  /**
   * The criterion does not apply to this system.
   */
  ConflabStatus_Inapplicable = 6,
  /**
   * A numeric search failed to converge or bracket.
   */
  ConflabStatus_NumericFailure = 7,
  /**
   * An unexpected internal failure (including caught panics).
   */
  ConflabStatus_Internal = 8,
} ConflabStatus;

/**
 * Opaque handle to a potential.
 */
typedef struct ConflabPotential ConflabPotential;

/**
 * Opaque handle to a dynamical system.
 */
typedef struct ConflabSystem ConflabSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the most recent error message into `buffer` (NUL-terminated,
 * truncated to `capacity` bytes) and return the full message length in
 * bytes, excluding the terminator. A zero return means no error has
 * been recorded on this thread.
 *
 * # Safety
 *
 * `buffer` must point to at least `capacity` writable bytes, or be
 * null (in which case only the length is returned).
 */
size_t conflab_last_error(char *buffer, size_t capacity);

/**
 * Create an irrational-rotation system. `name` selects the rotation
 * number: `"golden"` or `"silver"`. Returns null (and sets the error
 * message) on an unknown name.
 *
 * # Safety
 *
 * `name` must be a valid NUL-terminated UTF-8 string.
 */
struct ConflabSystem *conflab_system_rotation(const char *name);

/**
 * Create a finite-cycle system on `period` points. Returns null when
 * `period` is zero.
 */
struct ConflabSystem *conflab_system_finite_cycle(uint32_t period);

/**
 * Create the squaring-map system on the unit interval.
 */
struct ConflabSystem *conflab_system_squaring(void);

/**
 * Release a system handle. A null pointer is ignored.
 *
 * # Safety
 *
 * `system` must be a pointer previously returned by a
 * `conflab_system_*` constructor, not yet freed.
 */
void conflab_system_free(struct ConflabSystem *system);

/**
 * Create the constant potential F = value.
 */
struct ConflabPotential *conflab_potential_constant(double value);

/**
 * Create F(x) = amplitude·cos(2π·frequency·x).
 */
struct ConflabPotential *conflab_potential_cosine(uint32_t frequency, double amplitude);

/**
 * Create F(x) = amplitude·sin(2π·frequency·x).
 */
struct ConflabPotential *conflab_potential_sine(uint32_t frequency, double amplitude);

/**
 * Create the coboundary potential F = H∘φ − H from a transfer
 * function H. Takes ownership of `transfer`, which must not be used
 * or freed afterwards. Returns null when `transfer` is null.
 *
 * # Safety
 *
 * `transfer` must be a pointer previously returned by a
 * `conflab_potential_*` constructor, not yet freed.
 */
struct ConflabPotential *conflab_potential_coboundary(struct ConflabPotential *transfer);

/**
 * Create a potential from explicit values on a finite cycle:
 * `values[i]` is F at the 1-based point i+1. Returns null when the
 * list is null or empty.
 *
 * # Safety
 *
 * `values` must point to `count` readable doubles.
 */
struct ConflabPotential *conflab_potential_cycle_values(const double *values, size_t count);

/**
 * Release a potential handle. A null pointer is ignored.
 *
 * # Safety
 *
 * `potential` must be a pointer previously returned by a
 * `conflab_potential_*` constructor, not yet freed.
 */
void conflab_potential_free(struct ConflabPotential *potential);

/**
 * Test for an e^{βF}-conformal measure at one inverse temperature.
 * Writes 0 (holds), 1 (fails) or 2 (inconclusive) to `out_verdict`.
 * `x` seeds the orbit; see `conflab_spectrum_classify` for the
 * coordinate conventions.
 *
 * # Safety
 *
 * `system` and `potential` must be live handles from this library and
 * `out_verdict` must point to a writable int.
 */
enum ConflabStatus conflab_existence_check(const struct ConflabSystem *system,
                                           const struct ConflabPotential *potential,
                                           double x,
                                           double beta,
                                           uint64_t horizon,
                                           double tolerance,
                                           int *out_verdict);

/**
 * Scan a β grid and classify the set of inverse temperatures that
 * admit a conformal measure. Writes one of 0 (only β = 0), 1 (the
 * nonnegative ray), 2 (the nonpositive ray), 3 (the whole line) to
 * `out_shape`. The grid must contain zero and both signs. The seed
 * coordinate `x` is a circle coordinate in [0, 1) for rotations, an
 * interval coordinate in [0, 1] for the squaring map, and a 1-based
 * point index for finite cycles.
 *
 * # Safety
 *
 * `system` and `potential` must be live handles, `betas` must point
 * to `beta_count` readable doubles, and `out_shape` must point to a
 * writable int.
 */
enum ConflabStatus conflab_spectrum_classify(const struct ConflabSystem *system,
                                             const struct ConflabPotential *potential,
                                             const double *betas,
                                             size_t beta_count,
                                             double x,
                                             uint64_t horizon,
                                             double tolerance,
                                             int *out_shape);

/**
 * Build the exact conformal measure on a periodic orbit and write its
 * `period` weights (ordered along the orbit from the seed) to
 * `out_weights`. Fails with `ConstraintViolated` when the loop sum of
 * the potential does not telescope.
 *
 * # Safety
 *
 * `system` and `potential` must be live handles and `out_weights`
 * must point to at least `period` writable doubles.
 */
enum ConflabStatus conflab_periodic_weights(const struct ConflabSystem *system,
                                            const struct ConflabPotential *potential,
                                            double x,
                                            uint32_t period,
                                            double beta,
                                            double *out_weights);

/**
 * Compute the Gibbs weights e^{−β·H_jj}/Z of the finite-orbit matrix
 * model built from `count` potential values around a cycle, writing
 * `count` doubles to `out_weights`. The values must sum to zero (the
 * cyclic condition); anything else is `ConstraintViolated`.
 *
 * # Safety
 *
 * `f_values` must point to `count` readable doubles and `out_weights`
 * to `count` writable doubles.
 */
enum ConflabStatus conflab_gibbs_weights(const double *f_values,
                                         size_t count,
                                         double beta,
                                         double *out_weights);

/**
 * Measure the worst equilibrium-identity defect of the Gibbs state
 * over `trials` random operator pairs and write it to `out_residual`.
 * Exact states give values at rounding level (≤ 1e-10).
 *
 * # Safety
 *
 * `f_values` must point to `count` readable doubles and
 * `out_residual` to a writable double.
 */
enum ConflabStatus conflab_kms_residual(const double *f_values,
                                        size_t count,
                                        double beta,
                                        uint32_t trials,
                                        uint64_t seed,
                                        double *out_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFLAB_H */
