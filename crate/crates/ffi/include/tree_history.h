#ifndef TREE_HISTORY_H
#define TREE_HISTORY_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum th_status {
  TH_STATUS_OK = 0,
  TH_STATUS_NULL_POINTER = 1,
  TH_STATUS_INVALID_ARGUMENT = 2,
  TH_STATUS_PARSE_ERROR = 3,
  TH_STATUS_UNKNOWN_NODE = 4,
  TH_STATUS_BUFFER_TOO_SMALL = 5,
  TH_STATUS_MISMATCH = 6,
  TH_STATUS_PANIC = 7,
} th_status;

/**
 * Worst-case bound families for [`th_bound_k`].
 */
typedef enum th_bound_model {
  TH_BOUND_MODEL_UNIFORM = 0,
  TH_BOUND_MODEL_LINEAR = 1,
} th_bound_model;

/**
 * Root posterior of a tree.
 */
typedef struct th_posterior th_posterior;

/**
 * An observed tree with its node labels.
 */
typedef struct th_tree th_tree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *th_last_error(void);

/**
 * Parses an edge list (two labels per line) into a new tree handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum th_status th_tree_parse(const char *text, struct th_tree **out);

/**
 * Reads an edge-list file into a new tree handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum th_status th_tree_read(const char *path, struct th_tree **out);

/**
 * Grows a random tree under `kernel` (e.g. `"linear"`, `"sublinear:0.5"`)
 * with shuffled labels. `root` receives the index of the first node.
 *
 * # Safety
 * `kernel` must be a NUL-terminated string; `out` and `root` valid pointers.
 */
enum th_status th_tree_generate(const char *kernel,
                                size_t n,
                                uint64_t seed,
                                struct th_tree **out,
                                size_t *root);

/**
 * # Safety
 * `tree` must come from this library and not be freed twice.
 */
void th_tree_free(struct th_tree *tree);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `tree` must be null or a live handle.
 */
size_t th_tree_len(const struct th_tree *tree);

/**
 * Label of node `v`, or null when out of range. Owned by the tree.
 *
 * # Safety
 * `tree` must be null or a live handle.
 */
const char *th_tree_label(const struct th_tree *tree, size_t v);

/**
 * # Safety
 * `tree` a live handle, `label` a NUL-terminated string, `out` valid.
 */
enum th_status th_tree_index_of(const struct th_tree *tree, const char *label, size_t *out);

/**
 * Computes the root posterior of `tree`.
 *
 * # Safety
 * `tree` a live handle, `out` valid.
 */
enum th_status th_posterior_new(const struct th_tree *tree, struct th_posterior **out);

/**
 * # Safety
 * `post` must come from this library and not be freed twice.
 */
void th_posterior_free(struct th_posterior *post);

/**
 * Log of the number of histories rooted at `v`.
 *
 * # Safety
 * All pointers valid; `post` computed from `tree`.
 */
enum th_status th_posterior_log_hist(const struct th_tree *tree,
                                     const struct th_posterior *post,
                                     size_t v,
                                     double *out);

/**
 * Root probabilities of all nodes, written to `buf[0..len)`, where `len`
 * must equal the tree size.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum th_status th_posterior_root_probs(const struct th_tree *tree,
                                       const struct th_posterior *post,
                                       double *buf,
                                       size_t len);

/**
 * Root confidence set at level `1 - eps`. Node indices go to
 * `buf[0..cap)` and the set size to `size`; when `cap` is too small only
 * `size` is written and `BufferTooSmall` returned.
 *
 * # Safety
 * `buf` must hold `cap` entries (may be null when `cap` is 0).
 */
enum th_status th_confidence_set(const struct th_tree *tree,
                                 const struct th_posterior *post,
                                 double eps,
                                 size_t *buf,
                                 size_t cap,
                                 size_t *size);

/**
 * Worst-case confidence set size for uniform or linear attachment.
 *
 * # Safety
 * `out` valid.
 */
enum th_status th_bound_k(enum th_bound_model model, double eps, uint64_t *out);

/**
 * One history drawn uniformly at random: `buf[t]` is the node arriving at
 * time `t + 1`. `len` must equal the tree size.
 *
 * # Safety
 * `buf` must hold `len` entries.
 */
enum th_status th_sample_history(const struct th_tree *tree,
                                 const struct th_posterior *post,
                                 uint64_t seed,
                                 size_t *buf,
                                 size_t len);

/**
 * Monte Carlo posterior of the arrival time of node `label`: `buf[t - 1]`
 * receives the mass at time `t`. `kernel` may be null for the uniform
 * history law.
 *
 * # Safety
 * Strings NUL-terminated (or `kernel` null); `buf` must hold `len` entries.
 */
enum th_status th_arrival_posterior(const struct th_tree *tree,
                                    const struct th_posterior *post,
                                    const char *label,
                                    size_t samples,
                                    uint64_t seed,
                                    const char *kernel,
                                    double *buf,
                                    size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TREE_HISTORY_H */
