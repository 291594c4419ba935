#ifndef COSCI_H
#define COSCI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every exported function.
 */
typedef enum CosciStatus {
  COSCI_STATUS_OK = 0,
  COSCI_STATUS_NULL_POINTER = 1,
  COSCI_STATUS_INVALID_ARGUMENT = 2,
  COSCI_STATUS_IO = 3,
  COSCI_STATUS_PARSE = 4,
  COSCI_STATUS_SHAPE = 5,
  COSCI_STATUS_DATA = 6,
  COSCI_STATUS_CONFIG = 7,
  COSCI_STATUS_NUMERIC = 8,
  COSCI_STATUS_STATE = 9,
  COSCI_STATUS_VERSION = 10,
  COSCI_STATUS_CORRUPT = 11,
  COSCI_STATUS_PANIC = 12,
} CosciStatus;

/*
 Opaque multivariate time-series dataset.
 */
typedef struct CosciDataset CosciDataset;

/*
 Opaque trained per-channel model.
 */
typedef struct CosciModel CosciModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *cosci_last_error(void);

/*
 Two-channel toy data. `variant`: 0 simple sine, 1 frequency change, 2 anomaly.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
enum CosciStatus cosci_dataset_toy(uint32_t variant,
                                   size_t n_per_type,
                                   size_t length,
                                   uint64_t seed,
                                   struct CosciDataset **out);

/*
 Reads a dataset CSV. Pass 0 for `channels` and `length` to take them from the header line.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum CosciStatus cosci_dataset_load_csv(const char *path,
                                        size_t channels,
                                        size_t length,
                                        struct CosciDataset **out);

/*
 # Safety
 `data` must be a live dataset handle and `path` a NUL-terminated string.
 */
enum CosciStatus cosci_dataset_save_csv(const struct CosciDataset *data, const char *path);

/*
 # Safety
 `data` must be a live dataset handle; the out pointers must be valid.
 */
enum CosciStatus cosci_dataset_shape(const struct CosciDataset *data,
                                     size_t *n_instances,
                                     size_t *n_channels,
                                     size_t *length);

/*
 Copies all values (instance-major, then channel, then time) into `buf`,
 which must hold exactly `N * C * L` doubles.

 # Safety
 `buf` must be writable for `len` doubles.
 */
enum CosciStatus cosci_dataset_copy_values(const struct CosciDataset *data,
                                           double *buf,
                                           size_t len);

/*
 # Safety
 `data` must be NULL or a handle not yet freed.
 */
void cosci_dataset_free(struct CosciDataset *data);

/*
 Trains a model on `data`. `config_json` may be NULL for the single-core
 preset; otherwise a JSON configuration whose missing keys take the
 full-size defaults.

 # Safety
 `data` must be a live handle, `config_json` NULL or NUL-terminated, `out` a valid slot.
 */
enum CosciStatus cosci_model_train(const struct CosciDataset *data,
                                   const char *config_json,
                                   uint64_t seed,
                                   struct CosciModel **out);

/*
 # Safety
 `model` must be a live handle and `out` a valid slot.
 */
enum CosciStatus cosci_model_sample(const struct CosciModel *model,
                                    size_t n,
                                    uint64_t seed,
                                    struct CosciDataset **out);

/*
 # Safety
 `model` must be a live handle and `path` NUL-terminated.
 */
enum CosciStatus cosci_model_save(const struct CosciModel *model, const char *path);

/*
 # Safety
 `path` must be NUL-terminated and `out` a valid slot.
 */
enum CosciStatus cosci_model_load(const char *path, struct CosciModel **out);

/*
 # Safety
 `model` must be NULL or a handle not yet freed.
 */
void cosci_model_free(struct CosciModel *model);

/*
 Average per-channel Wasserstein distance between amplitude distributions.

 # Safety
 Both handles must be live and `out` valid.
 */
enum CosciStatus cosci_awd(const struct CosciDataset *real,
                           const struct CosciDataset *synthetic,
                           double *out);

/*
 Mean distance of amplitude pairs to the diagonal (two-channel data only).

 # Safety
 `data` must be live and `out` valid.
 */
enum CosciStatus cosci_aed(const struct CosciDataset *data, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COSCI_H */
