#ifndef GIBBSPROBE_H
#define GIBBSPROBE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every library call.
 */
typedef enum GpStatus {
  /**
   * The call succeeded.
   */
  GP_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  GP_STATUS_NULL_POINTER = 1,
  /**
   * An argument was rejected; see `gp_last_error_message`.
   */
  GP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A file could not be read or written.
   */
  GP_STATUS_IO = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  GP_STATUS_UTF8 = 4,
  /**
   * An internal panic was caught; see `gp_last_error_message`.
   */
  GP_STATUS_PANIC = 5,
} GpStatus;

/**
 * Opaque handle to an interaction model.
 */
typedef struct GpModel GpModel;

/**
 * Opaque handle to a noise-layer description.
 */
typedef struct GpNoise GpNoise;

/**
 * Opaque handle to a set of observed configurations with multiplicities.
 */
typedef struct GpSampleSet GpSampleSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Returns the message for the most recent failing call on this thread, or
 * NULL if the most recent call succeeded. The pointer is invalidated by the
 * next library call on the same thread; copy the string if you keep it.
 */
const char *gp_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `text` must be a pointer previously returned by `gp_model_to_json` (or
 * NULL) and must not be used afterwards.
 */
void gp_string_free(char *text);

/**
 * Creates an empty model on `n_spins` spins.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GpStatus gp_model_new(uintptr_t n_spins, struct GpModel **out);

/**
 * Releases a model handle. NULL is ignored.
 *
 * # Safety
 * `model` must be a handle from this library (or NULL) and must not be used
 * afterwards.
 */
void gp_model_free(struct GpModel *model);

/**
 * Parses a model from JSON text.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be a valid pointer.
 */
enum GpStatus gp_model_read_json(const char *json, struct GpModel **out);

/**
 * Serialises a model to JSON. The returned string must be released with
 * `gp_string_free`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_model_to_json(const struct GpModel *model, char **out);

/**
 * Reads a model from a JSON file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum GpStatus gp_model_read_file(const char *path, struct GpModel **out);

/**
 * Writes a model to a JSON file.
 *
 * # Safety
 * `model` must be a live handle; `path` must be NUL-terminated.
 */
enum GpStatus gp_model_write_file(const struct GpModel *model, const char *path);

/**
 * Reports the number of spins of a model.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_model_n_spins(const struct GpModel *model, uintptr_t *out);

/**
 * Reports the number of stored (non-zero) interaction terms.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_model_num_terms(const struct GpModel *model, uintptr_t *out);

/**
 * Sets the coefficient of the interaction on the given strictly increasing
 * spin indices (`n_spins` of them). Zero values are stored explicitly, like
 * any other coefficient.
 *
 * # Safety
 * `model` must be a live handle; `spins` must point to `n_spins` indices.
 */
enum GpStatus gp_model_set_term(struct GpModel *model,
                                const uintptr_t *spins,
                                uintptr_t n_spins,
                                double value);

/**
 * Reads the coefficient of the interaction on the given spin indices
 * (zero when the term is absent).
 *
 * # Safety
 * `model` must be a live handle; `spins` must point to `n_spins` indices;
 * `out` must be a valid pointer.
 */
enum GpStatus gp_model_get_term(const struct GpModel *model,
                                const uintptr_t *spins,
                                uintptr_t n_spins,
                                double *out);

/**
 * Evaluates the energy of the configuration with the given little-endian
 * index (bit `i` set means spin `i` is +1).
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_model_energy(const struct GpModel *model, uint64_t config_index, double *out);

/**
 * Reads a noise-layer description from a JSON file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum GpStatus gp_noise_read_file(const char *path, struct GpNoise **out);

/**
 * Releases a noise handle. NULL is ignored.
 *
 * # Safety
 * `noise` must be a handle from this library (or NULL) and must not be used
 * afterwards.
 */
void gp_noise_free(struct GpNoise *noise);

/**
 * Draws `m` configurations from the exact Gibbs distribution of `model`
 * (deterministic in `seed`).
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_sample_exact(const struct GpModel *model,
                              uint64_t m,
                              uint64_t seed,
                              struct GpSampleSet **out);

/**
 * Draws `m` configurations through the noise layer: each draw samples a
 * fresh noise realization, then one configuration from the conditional
 * distribution (deterministic in `seed`).
 *
 * # Safety
 * `model` and `noise` must be live handles; `out` must be a valid pointer.
 */
enum GpStatus gp_sample_noisy(const struct GpModel *model,
                              const struct GpNoise *noise,
                              uint64_t m,
                              uint64_t seed,
                              struct GpSampleSet **out);

/**
 * Releases a sample-set handle. NULL is ignored.
 *
 * # Safety
 * `set` must be a handle from this library (or NULL) and must not be used
 * afterwards.
 */
void gp_sample_set_free(struct GpSampleSet *set);

/**
 * Reports the total number of observations in a sample set.
 *
 * # Safety
 * `set` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_sample_set_total(const struct GpSampleSet *set, uint64_t *out);

/**
 * Reports how many times the configuration with the given little-endian
 * bit pattern was observed (zero when absent).
 *
 * # Safety
 * `set` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_sample_set_count(const struct GpSampleSet *set,
                                  uint64_t config_bits,
                                  uint64_t *out);

/**
 * Writes a sample set to the plain-text sample format.
 *
 * # Safety
 * `set` must be a live handle; `path` must be NUL-terminated.
 */
enum GpStatus gp_sample_set_write_file(const struct GpSampleSet *set, const char *path);

/**
 * Reads a sample set from the plain-text sample format.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum GpStatus gp_sample_set_read_file(const char *path, struct GpSampleSet **out);

/**
 * Reconstructs an interaction model from observed samples by convex
 * per-neighbourhood estimation.
 *
 * `order` caps the interaction order (2 = fields and pair couplings);
 * `grad_tol` is the convergence tolerance on the gradient norm; `max_iter`
 * bounds the iterations per neighbourhood; `l1_penalty` of zero disables
 * the sparsity penalty.
 *
 * # Safety
 * `set` must be a live handle; `out` must be a valid pointer.
 */
enum GpStatus gp_learn(const struct GpSampleSet *set,
                       uintptr_t order,
                       double grad_tol,
                       uintptr_t max_iter,
                       double l1_penalty,
                       struct GpModel **out);

/**
 * Closed-form effective field induced on a probe spin by a coupled
 * neighbour carrying symmetric binary field noise.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GpStatus gp_effective_field(double j, double h2, double h_sd1, double beta, double *out);

/**
 * Closed-form effective coupling induced between the end spins of a
 * three-spin chain whose ends carry symmetric binary field noise.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GpStatus gp_effective_coupling(double j12,
                                    double j23,
                                    double h_sd1,
                                    double h_sd3,
                                    double beta,
                                    double *out);

/**
 * Estimates the output field of a single spin from `s` positive
 * observations out of `m`, with an equal-tailed confidence interval at
 * level `alpha`.
 *
 * `out_saturation` receives 0 when the estimate is finite, -1 when all
 * observations were negative (estimate unbounded below; only `out_ci_high`
 * is meaningful), and +1 when all were positive (only `out_ci_low` is
 * meaningful). Slots without meaning are set to NaN.
 *
 * # Safety
 * All out pointers must be valid.
 */
enum GpStatus gp_estimate_hout(uint64_t s,
                               uint64_t m,
                               double alpha,
                               double *out_h,
                               double *out_ci_low,
                               double *out_ci_high,
                               int32_t *out_saturation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIBBSPROBE_H */
