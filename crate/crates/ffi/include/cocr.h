#ifndef COCR_H
#define COCR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CocrStatus {
  COCR_STATUS_OK = 0,
  COCR_STATUS_NULL_POINTER = 1,
  COCR_STATUS_INVALID_UTF8 = 2,
  COCR_STATUS_PARSE = 3,
  COCR_STATUS_DISTILL = 4,
  COCR_STATUS_EVAL = 5,
  COCR_STATUS_PROMPT = 6,
  COCR_STATUS_INVALID_ARGUMENT = 7,
  COCR_STATUS_PANIC = 8,
} CocrStatus;

/**
 * Opaque parsed AMR graph.
 */
typedef struct CocrGraph CocrGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next cocr call on this thread.
 */
const char *cocr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cocr_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from a cocr out-parameter and not have been freed.
 */
void cocr_string_free(char *s);

/**
 * Parses one PENMAN graph into a new handle.
 *
 * # Safety
 * `penman` must be a NUL-terminated string; `out` must be writable.
 */
enum CocrStatus cocr_graph_parse(const char *penman, struct CocrGraph **out);

/**
 * Releases a graph handle. Null is ignored.
 *
 * # Safety
 * `graph` must come from [`cocr_graph_parse`] and not have been freed.
 */
void cocr_graph_free(struct CocrGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum CocrStatus cocr_graph_serialize(const struct CocrGraph *graph, char **out);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum CocrStatus cocr_graph_node_count(const struct CocrGraph *graph, size_t *out);

/**
 * Number of sentence subgraphs (1 unless the root is `multi-sentence`).
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum CocrStatus cocr_graph_sentence_count(const struct CocrGraph *graph, size_t *out);

/**
 * Distills the graph's concept list and writes it as JSON
 * (`{"concepts": [...], "per_sentence": [...], "origins": [...]}`).
 * `config_toml` may be null for the default configuration.
 *
 * # Safety
 * `graph` must be a live handle, `source` a NUL-terminated string,
 * `config_toml` null or NUL-terminated, `out_json` writable.
 */
enum CocrStatus cocr_distill_json(const struct CocrGraph *graph,
                                  const char *source,
                                  const char *config_toml,
                                  char **out_json);

/**
 * Trapezoid AUC over `[start, end]` of the curve `accs[i]` at
 * `k = first_k + i`.
 *
 * # Safety
 * `accs` must point to `len` doubles; `out` must be writable.
 */
enum CocrStatus cocr_auc(const double *accs,
                         size_t len,
                         uint32_t first_k,
                         uint32_t start,
                         uint32_t end,
                         double *out);

/**
 * Writes 1 when some gold answer occurs in `generated`, else 0. Matching
 * is case-insensitive unless `exact` is non-zero.
 *
 * # Safety
 * `generated` must be NUL-terminated, `golds` must point to `n_golds`
 * NUL-terminated strings, `out` must be writable.
 */
enum CocrStatus cocr_answer_correct(const char *generated,
                                    const char *const *golds,
                                    size_t n_golds,
                                    int exact,
                                    int *out);

/**
 * Renders the reconstruction prompt for an ordered concept list.
 *
 * # Safety
 * `concepts` must point to `n` NUL-terminated strings; `out` must be writable.
 */
enum CocrStatus cocr_reconstruction_prompt(const char *const *concepts, size_t n, char **out);

/**
 * Renders the final question prompt from reconstructed facts.
 *
 * # Safety
 * `facts` and `question` must be NUL-terminated; `out` must be writable.
 */
enum CocrStatus cocr_inference_prompt(const char *facts, const char *question, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COCR_H */
