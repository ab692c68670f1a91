/* C interface to the regrisk domain risk-scoring engine. */

#ifndef REGRISK_H
#define REGRISK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum RegriskStatus {
  REGRISK_STATUS_OK = 0,
  REGRISK_STATUS_NULL_ARGUMENT = 1,
  REGRISK_STATUS_INVALID_UTF8 = 2,
  REGRISK_STATUS_INVALID_DOMAIN = 3,
  REGRISK_STATUS_DATA_ERROR = 4,
  REGRISK_STATUS_MODEL_ERROR = 5,
  REGRISK_STATUS_INTERNAL_ERROR = 6,
} RegriskStatus;

/**
 * Opaque scorer handle: a frozen model plus registrant index.
 */
typedef struct RegriskScorer RegriskScorer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Model bundle format version this library reads and writes.
 */
uint32_t regrisk_format_version(void);

/**
 * Static description of a status code. Never needs freeing.
 */
const char *regrisk_status_message(enum RegriskStatus status);

/**
 * Load a model bundle and registrant database and build a scorer.
 *
 * # Safety
 * `model_path` and `registrants_path` must be NUL-terminated strings;
 * `out_scorer` must be a valid pointer. On success `*out_scorer` owns the
 * scorer and must be released with [`regrisk_scorer_free`].
 */
enum RegriskStatus regrisk_scorer_open(const char *model_path,
                                       const char *registrants_path,
                                       struct RegriskScorer **out_scorer);

/**
 * Score one domain. On success `*out_json` holds the response record as a
 * JSON object (same field names as the HTTP service); free it with
 * [`regrisk_string_free`].
 *
 * # Safety
 * `scorer` must come from [`regrisk_scorer_open`] and not be freed;
 * `domain` must be NUL-terminated; `out_json` must be a valid pointer.
 */
enum RegriskStatus regrisk_scorer_score_json(const struct RegriskScorer *scorer,
                                             const char *domain,
                                             char **out_json);

/**
 * Similarity ratio between two raw domain strings: the matched-total over
 * max-length ratio by default, the symmetric 2M/(len1+len2) form when
 * `symmetric` is set.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated; `out_score` must be valid.
 */
enum RegriskStatus regrisk_similarity(const char *a,
                                      const char *b,
                                      bool symmetric,
                                      double *out_score);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must have been returned by a regrisk function and not freed before.
 * NULL is a no-op.
 */
void regrisk_string_free(char *s);

/**
 * Release a scorer.
 *
 * # Safety
 * `scorer` must come from [`regrisk_scorer_open`] and not be freed
 * before. NULL is a no-op.
 */
void regrisk_scorer_free(struct RegriskScorer *scorer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGRISK_H */
