#ifndef IRONIA_H
#define IRONIA_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes shared by every entry point.
typedef enum {
  IRONIA_STATUS_OK = 0,
  IRONIA_STATUS_NULL_ARGUMENT = 1,
  IRONIA_STATUS_INVALID_UTF8 = 2,
  // Malformed input: bad label, wrong length, invalid verdict.
  IRONIA_STATUS_INVALID_ARGUMENT = 3,
  IRONIA_STATUS_NOT_FOUND = 4,
  // The operation conflicts with current state (already resolved, not assigned, ...).
  IRONIA_STATUS_CONFLICT = 5,
  IRONIA_STATUS_IO = 6,
  // A file or response could not be parsed.
  IRONIA_STATUS_FORMAT = 7,
  // The encoder or model backend failed.
  IRONIA_STATUS_BACKEND = 8,
  // A Rust panic was caught at the boundary.
  IRONIA_STATUS_INTERNAL = 9,
} IroniaStatus;

// Loaded dataset.
typedef struct IroniaDataset IroniaDataset;

// Trained classification head.
typedef struct IroniaHead IroniaHead;

// Review queue backed by an event log.
typedef struct IroniaReviewQueue IroniaReviewQueue;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call on the same thread.
const char *ironia_last_error(void);

// Library version as a static string.
const char *ironia_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void ironia_string_free(char *s);

// Loads a JSONL or CSV dataset (chosen by extension).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
IroniaStatus ironia_dataset_load(const char *path, IroniaDataset **out);

// Number of entries in the dataset.
//
// # Safety
// `ds` must be a live handle; `out_len` must be writable.
IroniaStatus ironia_dataset_len(const IroniaDataset *ds, size_t *out_len);

// Class distribution as JSON `{"rows": [{"label", "count", "percentage"}], "total"}`.
// With `binary` set, labels are collapsed to IRONÍA / NO_IRONÍA first.
//
// # Safety
// `ds` must be a live handle; `out_json` must be writable. Free the result
// with [`ironia_string_free`].
IroniaStatus ironia_dataset_distribution_json(const IroniaDataset *ds,
                                              bool binary,
                                              char **out_json);

// # Safety
// `ds` must be NULL or a handle from [`ironia_dataset_load`], freed once.
void ironia_dataset_free(IroniaDataset *ds);

// Loads a head checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
IroniaStatus ironia_head_load(const char *path, IroniaHead **out);

// Number of output nodes: 4 (multiclass) or 2 (binary).
//
// # Safety
// `head` must be a live handle; `out_dim` must be writable.
IroniaStatus ironia_head_output_dim(const IroniaHead *head, size_t *out_dim);

// Encoder id recorded in the checkpoint. Borrowed; valid while `head` lives.
//
// # Safety
// `head` must be NULL or a live handle.
const char *ironia_head_encoder_id(const IroniaHead *head);

// Scores one 768-value embedding. Writes the predicted class index
// (`category_encoded` convention) and, if `out_probs` is non-NULL, the
// per-class probabilities; `probs_len` must then equal the output dimension.
//
// # Safety
// `x` must point to `len` doubles; `out_probs` to `probs_len` doubles.
IroniaStatus ironia_head_predict(const IroniaHead *head,
                                 const double *x,
                                 size_t len,
                                 size_t *out_class,
                                 double *out_probs,
                                 size_t probs_len);

// # Safety
// `head` must be NULL or a handle from [`ironia_head_load`], freed once.
void ironia_head_free(IroniaHead *head);

// Deterministic checkpoint-free embedding of `text` into `out` (`len` must be 768).
//
// # Safety
// `text` must be a NUL-terminated string; `out` must point to `len` doubles.
IroniaStatus ironia_stub_embed(const char *text, double *out, size_t len);

// Parses a classification response into JSON `{"tag": "IRONÍA", "explanation": "..."}`.
//
// # Safety
// `raw` must be a NUL-terminated string; `out_json` must be writable.
IroniaStatus ironia_parse_response(const char *raw, char **out_json);

// Metrics for a row-major `k`x`k` confusion matrix (rows gold, columns
// predicted; `k` is 2 or 4, labels in report order with IRONÍA first).
// Writes the evaluation report as JSON.
//
// # Safety
// `counts` must point to `k * k` values; `out_json` must be writable.
IroniaStatus ironia_metrics_from_confusion(const uint64_t *counts, size_t k, char **out_json);

// Opens (or creates) a review queue event log. `lease_minutes` <= 0 keeps the default.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
IroniaStatus ironia_queue_open(const char *path, int64_t lease_minutes, IroniaReviewQueue **out);

// Assigns the oldest pending item to `reviewer_id` and writes it as JSON.
// When nothing is pending, returns `Ok` and sets `*out_json` to NULL.
//
// # Safety
// `q` must be a live handle; `reviewer_id` a NUL-terminated string.
IroniaStatus ironia_queue_next(const IroniaReviewQueue *q,
                               const char *reviewer_id,
                               char **out_json);

// Records a verdict given as JSON
// `{"entry_id", "decision": "accept"|"override"|"unreadable", "override_tag"?, "reviewer_id"}`.
//
// # Safety
// `q` must be a live handle; `verdict_json` a NUL-terminated string.
IroniaStatus ironia_queue_submit(const IroniaReviewQueue *q, const char *verdict_json);

// Queue counts and agreement over resolved items, as JSON.
//
// # Safety
// `q` must be a live handle; `out_json` must be writable.
IroniaStatus ironia_queue_stats_json(const IroniaReviewQueue *q, char **out_json);

// # Safety
// `q` must be NULL or a handle from [`ironia_queue_open`], freed once.
void ironia_queue_free(IroniaReviewQueue *q);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRONIA_H */
