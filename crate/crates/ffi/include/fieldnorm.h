#ifndef FIELDNORM_H
#define FIELDNORM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FieldnormStatus {
  FIELDNORM_STATUS_OK = 0,
  FIELDNORM_STATUS_NULL_POINTER = 1,
  FIELDNORM_STATUS_INVALID_ARGUMENT = 2,
  FIELDNORM_STATUS_IO = 3,
  FIELDNORM_STATUS_PARSE = 4,
  FIELDNORM_STATUS_UNDEFINED = 5,
  FIELDNORM_STATUS_NOT_FOUND = 6,
  FIELDNORM_STATUS_PANIC = 7,
} FieldnormStatus;

/**
 * Corpus format selector for [`fieldnorm_corpus_load`].
 */
typedef enum FieldnormFormat {
  /**
   * Decide from the file extension (`.tsv` or JSONL).
   */
  FIELDNORM_FORMAT_AUTO = 0,
  FIELDNORM_FORMAT_JSONL = 1,
  FIELDNORM_FORMAT_TSV = 2,
} FieldnormFormat;

typedef struct FieldnormCorpus FieldnormCorpus;

/**
 * One indicator: journal ids in ascending order with their values.
 */
typedef struct FieldnormIndicator FieldnormIndicator;

typedef struct FieldnormJournals FieldnormJournals;

typedef struct FieldnormValidationReport {
  size_t total_docs;
  size_t total_refs;
  size_t invalid_year_refs;
  size_t pre1900_refs;
  size_t future_year_refs;
  size_t unmatched_venue_refs;
  size_t matched_refs;
  size_t unknown_journal_docs;
} FieldnormValidationReport;

/**
 * Variance components; `eta2` and `perm_p` are NaN when undefined or not
 * requested.
 */
typedef struct FieldnormVarComp {
  double sigma2_between;
  double sigma2_within;
  double eta2;
  double perm_p;
  size_t groups_used;
  size_t journals_used;
} FieldnormVarComp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *fieldnorm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fieldnorm_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FieldnormStatus fieldnorm_journals_load(const char *path, struct FieldnormJournals **out);

/**
 * # Safety
 * `journals` must be null or a handle from [`fieldnorm_journals_load`].
 */
size_t fieldnorm_journals_len(const struct FieldnormJournals *journals);

/**
 * # Safety
 * `journals` must be null or a live handle; it is invalid afterwards.
 */
void fieldnorm_journals_free(struct FieldnormJournals *journals);

/**
 * Load a corpus. Malformed records are skipped and counted; see
 * [`fieldnorm_corpus_rejected`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FieldnormStatus fieldnorm_corpus_load(const char *path,
                                           enum FieldnormFormat format,
                                           int32_t census_year,
                                           bool allow_truncated,
                                           struct FieldnormCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t fieldnorm_corpus_len(const struct FieldnormCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a live handle.
 */
size_t fieldnorm_corpus_rejected(const struct FieldnormCorpus *corpus);

/**
 * Collapse merge groups in both handles, then resolve every cited
 * reference against the journal table. Call once before counting.
 *
 * # Safety
 * Both arguments must be live handles.
 */
enum FieldnormStatus fieldnorm_corpus_prepare(struct FieldnormCorpus *corpus,
                                              struct FieldnormJournals *journals);

/**
 * # Safety
 * `corpus` and `journals` must be live handles and `out` a valid pointer.
 */
enum FieldnormStatus fieldnorm_corpus_validate(const struct FieldnormCorpus *corpus,
                                               const struct FieldnormJournals *journals,
                                               struct FieldnormValidationReport *out);

/**
 * # Safety
 * `corpus` must be null or a live handle; it is invalid afterwards.
 */
void fieldnorm_corpus_free(struct FieldnormCorpus *corpus);

/**
 * Compute one named indicator (for example `IF5-FC`, `TC-IC2`, `FC/P`)
 * from a prepared corpus. `citable_types` is a comma-separated list of
 * document types or null for the default (article, review).
 *
 * # Safety
 * Handles must be live, strings NUL-terminated or null where allowed, and
 * `out` a valid pointer.
 */
enum FieldnormStatus fieldnorm_indicator_compute(const struct FieldnormCorpus *corpus,
                                                 const struct FieldnormJournals *journals,
                                                 const char *indicator_id,
                                                 const char *citable_types,
                                                 struct FieldnormIndicator **out);

/**
 * Number of journals with a defined value.
 *
 * # Safety
 * `ind` must be null or a live handle.
 */
size_t fieldnorm_indicator_len(const struct FieldnormIndicator *ind);

/**
 * Number of journals left undefined by a zero denominator.
 *
 * # Safety
 * `ind` must be null or a live handle.
 */
size_t fieldnorm_indicator_undefined(const struct FieldnormIndicator *ind);

/**
 * Entry `index` in journal-id order. `journal_id` points into the handle.
 *
 * # Safety
 * `ind` must be a live handle and the out pointers valid.
 */
enum FieldnormStatus fieldnorm_indicator_get(const struct FieldnormIndicator *ind,
                                             size_t index,
                                             const char **journal_id,
                                             double *value);

/**
 * Value for one journal; `NotFound` when the journal has no defined value.
 *
 * # Safety
 * `ind` must be a live handle, `journal_id` NUL-terminated and `value` valid.
 */
enum FieldnormStatus fieldnorm_indicator_value(const struct FieldnormIndicator *ind,
                                               const char *journal_id,
                                               double *value);

/**
 * # Safety
 * `ind` must be null or a live handle; it is invalid afterwards.
 */
void fieldnorm_indicator_free(struct FieldnormIndicator *ind);

/**
 * Percentile ranks (share of values strictly below, times 100) and PR6
 * classes for `n` values. Either output may be null.
 *
 * # Safety
 * `values` must hold `n` doubles; non-null outputs must hold `n` elements.
 */
enum FieldnormStatus fieldnorm_percentile_ranks(const double *values,
                                                size_t n,
                                                double *pr100,
                                                uint8_t *pr6);

uint8_t fieldnorm_pr6_class(double pr100);

/**
 * # Safety
 * `x` and `y` must hold `n` doubles and `out` be valid.
 */
enum FieldnormStatus fieldnorm_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * Spearman correlation with average ranks for ties.
 *
 * # Safety
 * `x` and `y` must hold `n` doubles and `out` be valid.
 */
enum FieldnormStatus fieldnorm_spearman(const double *x, const double *y, size_t n, double *out);

/**
 * One-way variance components of `values` grouped by `groups` (any
 * integer labels). Groups smaller than `min_group_size` are dropped.
 * `n_perm = 0` skips the permutation test; otherwise at least 999.
 *
 * # Safety
 * `values` and `groups` must hold `n` elements and `out` be valid.
 */
enum FieldnormStatus fieldnorm_varcomp(const double *values,
                                       const uint32_t *groups,
                                       size_t n,
                                       size_t min_group_size,
                                       size_t n_perm,
                                       uint64_t seed,
                                       struct FieldnormVarComp *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDNORM_H */
