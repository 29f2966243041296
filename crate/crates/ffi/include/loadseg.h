#ifndef LOADSEG_H
#define LOADSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_DATA = 3,
  LS_STATUS_NUMERICAL = 4,
  LS_STATUS_IO = 5,
  LS_STATUS_PANIC = 6,
} LsStatus;

/**
 * A cluster library produced by the two-stage method or the benchmark.
 */
typedef struct LsLibrary LsLibrary;

/**
 * A cleaned set of equal-length daily profiles.
 */
typedef struct LsProfileSet LsProfileSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *ls_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Reads a long-format meter CSV (`timestamp,household_id,power_kw`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LsStatus ls_profile_set_from_csv(const char *path,
                                      uint32_t resolution_minutes,
                                      bool normalize,
                                      struct LsProfileSet **out);

/**
 * Builds a profile set from a row-major `n_profiles * samples_per_day` buffer.
 *
 * # Safety
 * `values` must point to `n_profiles * samples_per_day` doubles and `out` must be valid.
 */
enum LsStatus ls_profile_set_from_rows(const double *values,
                                       size_t n_profiles,
                                       size_t samples_per_day,
                                       struct LsProfileSet **out);

/**
 * # Safety
 * `set` must be null or a handle from this library that has not been freed.
 */
void ls_profile_set_free(struct LsProfileSet *set);

/**
 * Number of profiles, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t ls_profile_set_len(const struct LsProfileSet *set);

/**
 * Samples per profile, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t ls_profile_set_samples_per_day(const struct LsProfileSet *set);

/**
 * Runs the two-stage method. `config_json` is a pipeline configuration
 * document (its input and output keys are ignored); null or empty selects the defaults.
 *
 * # Safety
 * `set` must be a live handle, `config_json` null or NUL-terminated, `out` valid.
 */
enum LsStatus ls_two_stage(const struct LsProfileSet *set,
                           const char *config_json,
                           struct LsLibrary **out);

/**
 * Runs the engine directly at `k_final` with Euclidean-mean centroids.
 *
 * # Safety
 * Same contract as [`ls_two_stage`].
 */
enum LsStatus ls_benchmark(const struct LsProfileSet *set,
                           const char *config_json,
                           struct LsLibrary **out);

/**
 * # Safety
 * `lib` must be null or a handle from this library that has not been freed.
 */
void ls_library_free(struct LsLibrary *lib);

/**
 * Number of clusters, or 0 for a null handle.
 *
 * # Safety
 * `lib` must be null or a live handle.
 */
size_t ls_library_k(const struct LsLibrary *lib);

/**
 * Id and size of the cluster at `index`.
 *
 * # Safety
 * `lib` must be a live handle; `id` and `size` valid pointers.
 */
enum LsStatus ls_library_cluster(const struct LsLibrary *lib,
                                 size_t index,
                                 size_t *id,
                                 size_t *size);

/**
 * Copies the centroid of the cluster at `index` into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `lib` must be a live handle and `buf` must hold `len` doubles.
 */
enum LsStatus ls_library_centroid(const struct LsLibrary *lib,
                                  size_t index,
                                  double *buf,
                                  size_t len);

/**
 * Writes the cluster id of every profile into `buf`, which holds `len` entries.
 *
 * # Safety
 * `lib` must be a live handle and `buf` must hold `len` entries.
 */
enum LsStatus ls_library_assignments(const struct LsLibrary *lib, size_t *buf, size_t len);

/**
 * Weighted average centroid-member correlation of `lib` over `set`.
 *
 * # Safety
 * Both handles must be live and `out` valid.
 */
enum LsStatus ls_library_wac(const struct LsProfileSet *set,
                             const struct LsLibrary *lib,
                             double *out);

/**
 * DTW between two series. A negative `band` means unconstrained.
 *
 * # Safety
 * `p` and `q` must hold `n` and `m` doubles; `out` must be valid.
 */
enum LsStatus ls_dtw(const double *p,
                     size_t n,
                     const double *q,
                     size_t m,
                     int64_t band,
                     double *out);

/**
 * Complexity-invariant DTW. A negative `band` means unconstrained.
 *
 * # Safety
 * Same contract as [`ls_dtw`].
 */
enum LsStatus ls_cidtw(const double *p,
                       size_t n,
                       const double *q,
                       size_t m,
                       int64_t band,
                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOADSEG_H */
