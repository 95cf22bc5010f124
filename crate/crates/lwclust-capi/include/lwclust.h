#ifndef LWCLUST_H
#define LWCLUST_H

/* Generated by cbindgen from lwclust-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LwStatus {
  LW_STATUS_OK = 0,
  LW_STATUS_NULL_POINTER = 1,
  /**
   * Rejected data or arguments (bad distances, wrong lengths, k out of
   * range, zero workers).
   */
  LW_STATUS_INVALID_INPUT = 2,
  /**
   * A clustering run failed internally (transport or protocol fault).
   */
  LW_STATUS_RUN_FAILED = 3,
  /**
   * The caller's buffer is too small.
   */
  LW_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * A panic was caught at the boundary.
   */
  LW_STATUS_PANIC = 5,
} LwStatus;

/**
 * Linkage scheme selector, mirroring the six supported schemes.
 */
typedef enum LwScheme {
  LW_SCHEME_SINGLE = 0,
  LW_SCHEME_COMPLETE = 1,
  LW_SCHEME_GROUP_AVERAGE = 2,
  LW_SCHEME_WEIGHTED_AVERAGE = 3,
  LW_SCHEME_CENTROID = 4,
  LW_SCHEME_WARD = 5,
} LwScheme;

/**
 * Opaque dendrogram handle.
 */
typedef struct LwDendrogram LwDendrogram;

/**
 * Opaque distance matrix handle.
 */
typedef struct LwMatrix LwMatrix;

/**
 * One merge record: `left`/`right` are cluster ids (leaves `0..n-1`, merge
 * k creates `n+k`), `height` the merge distance, `size` the new cluster's
 * member count.
 */
typedef struct LwMerge {
  uint64_t left;
  uint64_t right;
  double height;
  uint64_t size;
} LwMerge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message for this thread into `buffer` (always
 * NUL-terminated when `len > 0`) and returns the full length of the
 * message including the NUL, so callers can size a retry.
 * # Safety
 *
 * `buffer` must be null or valid for `len` writable bytes.
 */
size_t lw_last_error(char *buffer, size_t len);

/**
 * Builds a matrix from its condensed upper-triangle cells (`len` must be
 * `items*(items-1)/2`). Distances must be finite and non-negative.
 * # Safety
 *
 * `cells` must be null or valid for `len` reads; `out` must be valid for one pointer write.
 */
enum LwStatus lw_matrix_from_condensed(size_t items,
                                       const double *cells,
                                       size_t len,
                                       struct LwMatrix **out);

/**
 * Builds a matrix of pairwise Euclidean distances from `count` points of
 * `dims` coordinates each, laid out row-major.
 * # Safety
 *
 * `points` must be null or valid for `count * dims` reads; `out` must be valid for one pointer write.
 */
enum LwStatus lw_matrix_from_points(const double *points,
                                    size_t count,
                                    size_t dims,
                                    struct LwMatrix **out);

/**
 * Number of items the matrix covers; 0 for null.
 * # Safety
 *
 * `matrix` must be null or a live handle from a constructor.
 */
size_t lw_matrix_items(const struct LwMatrix *matrix);

/**
 * # Safety
 *
 * `matrix` must be null or a live handle, which is consumed.
 */
void lw_matrix_free(struct LwMatrix *matrix);

/**
 * Serial clustering.
 * # Safety
 *
 * `matrix` must be null or a live handle; `out` must be valid for one pointer write.
 */
enum LwStatus lw_cluster_serial(const struct LwMatrix *matrix,
                                enum LwScheme scheme,
                                struct LwDendrogram **out);

/**
 * Distributed clustering over `workers` threads; the output is identical
 * to `lw_cluster_serial` for every worker count.
 * # Safety
 *
 * `matrix` must be null or a live handle; `out` must be valid for one pointer write.
 */
enum LwStatus lw_cluster_distributed(const struct LwMatrix *matrix,
                                     enum LwScheme scheme,
                                     size_t workers,
                                     struct LwDendrogram **out);

/**
 * Number of original items (leaves); 0 for null.
 * # Safety
 *
 * `dendrogram` must be null or a live handle.
 */
size_t lw_dendrogram_items(const struct LwDendrogram *dendrogram);

/**
 * Number of merges (`items - 1` for non-degenerate inputs); 0 for null.
 * # Safety
 *
 * `dendrogram` must be null or a live handle.
 */
size_t lw_dendrogram_merge_count(const struct LwDendrogram *dendrogram);

/**
 * Copies merge `index` into `out`.
 * # Safety
 *
 * `dendrogram` must be null or a live handle; `out` must be valid for one record write.
 */
enum LwStatus lw_dendrogram_merge_at(const struct LwDendrogram *dendrogram,
                                     size_t index,
                                     struct LwMerge *out);

/**
 * Writes the `k`-cluster flat labels (one per item, `0..k-1` in order of
 * first appearance) into `labels`, which must hold at least
 * `lw_dendrogram_items` entries.
 * # Safety
 *
 * `dendrogram` must be null or a live handle; `labels` must be null or valid for `len` writes.
 */
enum LwStatus lw_dendrogram_cut(const struct LwDendrogram *dendrogram,
                                size_t k,
                                uint64_t *labels,
                                size_t len);

/**
 * Writes the dendrogram's hex SHA-256 digest (64 characters plus NUL;
 * `len` must be at least 65). Two dendrograms share a digest exactly when
 * they are bitwise identical.
 * # Safety
 *
 * `dendrogram` must be null or a live handle; `buffer` must be null or valid for `len` writable bytes.
 */
enum LwStatus lw_dendrogram_digest(const struct LwDendrogram *dendrogram,
                                   char *buffer,
                                   size_t len);

/**
 * # Safety
 *
 * `dendrogram` must be null or a live handle, which is consumed.
 */
void lw_dendrogram_free(struct LwDendrogram *dendrogram);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LWCLUST_H */
