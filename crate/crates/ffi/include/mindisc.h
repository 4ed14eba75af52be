#ifndef MINDISC_H
#define MINDISC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_CONFIG = 3,
  MD_STATUS_IO = 4,
  MD_STATUS_BAD_DATA = 5,
  MD_STATUS_SHAPE_MISMATCH = 6,
  MD_STATUS_NON_FINITE_LOSS = 7,
  MD_STATUS_CORRUPT_CHECKPOINT = 8,
  MD_STATUS_PANIC = 99,
} MdStatus;

typedef struct MdConfig MdConfig;

typedef struct MdDataset MdDataset;

// A trained network together with its optimizer state and configuration.
typedef struct MdModel MdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL if none. The pointer
// stays valid until the next failing call on the same thread.
const char *md_last_error(void);

// Generates a labeled two-moons dataset.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum MdStatus md_dataset_two_moons(uintptr_t n,
                                   double noise,
                                   double rotation_deg,
                                   uint64_t seed,
                                   struct MdDataset **out);

// Builds a dataset from a row-major `rows × cols` feature array. `labels`
// may be NULL for an unlabeled dataset; otherwise it holds `rows` entries in
// `[0, num_classes)`.
//
// # Safety
// `features` must point to `rows * cols` doubles, `labels` (if non-NULL) to
// `rows` integers, and `out` to writable storage for one handle.
enum MdStatus md_dataset_from_arrays(const double *features,
                                     uintptr_t rows,
                                     uintptr_t cols,
                                     const int64_t *labels,
                                     uintptr_t num_classes,
                                     struct MdDataset **out);

// Loads a headerless CSV; when `labeled` is nonzero the last column is the
// class id.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum MdStatus md_dataset_load_csv(const char *path,
                                  uintptr_t num_classes,
                                  bool labeled,
                                  struct MdDataset **out);

// Number of rows and feature columns.
//
// # Safety
// `dataset` must be a live handle; `rows` and `cols` writable.
enum MdStatus md_dataset_shape(const struct MdDataset *dataset, uintptr_t *rows, uintptr_t *cols);

// # Safety
// `dataset` must be NULL or a handle not yet freed.
void md_dataset_free(struct MdDataset *dataset);

// A configuration with every key at its default.
//
// # Safety
// `out` must be writable.
enum MdStatus md_config_new(struct MdConfig **out);

// Sets one key from its text form, e.g. `("layers", "2,32,32,2")`.
//
// # Safety
// `config` must be a live handle; `key` and `value` NUL-terminated strings.
enum MdStatus md_config_set(struct MdConfig *config, const char *key, const char *value);

// # Safety
// `config` must be NULL or a handle not yet freed.
void md_config_free(struct MdConfig *config);

// Trains on a labeled source and the target's features (its labels, if
// any, are ignored). `history_len` (may be NULL) receives the number of
// optimizer steps taken.
//
// # Safety
// All handles must be live; `out` writable.
enum MdStatus md_train(const struct MdConfig *config,
                       const struct MdDataset *source,
                       const struct MdDataset *target,
                       struct MdModel **out,
                       uintptr_t *history_len);

// # Safety
// `path` must be NUL-terminated; `out` writable.
enum MdStatus md_model_load(const char *path, struct MdModel **out);

// # Safety
// `model` must be a live handle; `path` NUL-terminated.
enum MdStatus md_model_save(const struct MdModel *model, const char *path);

// # Safety
// `model` must be a live handle; `out` writable.
enum MdStatus md_model_num_classes(const struct MdModel *model, uintptr_t *out);

// Predicted class (argmax, ties to the lowest index) for each of `rows`
// feature rows; writes `rows` entries to `out_labels`.
//
// # Safety
// `features` must point to `rows * cols` doubles and `out_labels` to `rows`
// writable slots.
enum MdStatus md_model_predict(const struct MdModel *model,
                               const double *features,
                               uintptr_t rows,
                               uintptr_t cols,
                               uintptr_t *out_labels);

// Accuracy in percent on a labeled dataset.
//
// # Safety
// Handles must be live; `out` writable.
enum MdStatus md_model_accuracy(const struct MdModel *model,
                                const struct MdDataset *dataset,
                                double *out);

// Writes the 2-D embedding CSV (`x,y,domain,label`) of both datasets.
//
// # Safety
// Handles must be live; `path` NUL-terminated.
enum MdStatus md_model_export_embedding(const struct MdModel *model,
                                        const struct MdDataset *source,
                                        const struct MdDataset *target,
                                        const char *path);

// # Safety
// `model` must be NULL or a handle not yet freed.
void md_model_free(struct MdModel *model);

// CORAL distance between two `n × dim` activation matrices.
//
// # Safety
// `source` must point to `ns * dim` doubles, `target` to `nt * dim`.
enum MdStatus md_coral_loss(const double *source,
                            uintptr_t ns,
                            const double *target,
                            uintptr_t nt,
                            uintptr_t dim,
                            double *out);

// Biased MMD² with an equally weighted Gaussian kernel bank.
//
// # Safety
// `source` must point to `ns * dim` doubles, `target` to `nt * dim`,
// `bandwidths` to `count` doubles.
enum MdStatus md_mmd2_loss(const double *source,
                           uintptr_t ns,
                           const double *target,
                           uintptr_t nt,
                           uintptr_t dim,
                           const double *bandwidths,
                           uintptr_t count,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINDISC_H */
