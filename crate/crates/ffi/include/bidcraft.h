#ifndef BIDCRAFT_H
#define BIDCRAFT_H

/* Generated by cbindgen from bidcraft-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of a bidcraft call.
typedef enum BcStatus {
  BC_OK = 0,
  // Null pointer, bad UTF-8, or invalid configuration.
  BC_INVALID_ARGUMENT = 1,
  // Malformed input data.
  BC_PARSE_ERROR = 2,
  // The data cannot support the operation.
  BC_DATA_ERROR = 3,
  // Filesystem or serialization failure.
  BC_IO_ERROR = 4,
  // Non-finite numbers or dimension mismatches.
  BC_NUMERIC_ERROR = 5,
  // An index outside a table or grid.
  BC_RANGE_ERROR = 6,
  // The library panicked; state may be inconsistent.
  BC_PANIC = 7,
} BcStatus;

// Replayable bidding strategies for [`bc_simulate`].
typedef enum BcBidder {
  // Solved MDP policy; requires a table handle. `param` is ignored.
  BC_BIDDER_RLB = 0,
  // Linear bidding; `param` is the base bid.
  BC_BIDDER_LINEAR = 1,
  // Max cost per click; `param` is the max CPC.
  BC_BIDDER_MCPC = 2,
  // Constant bid; `param` is the bid.
  BC_BIDDER_CONSTANT = 3,
} BcBidder;

// Opaque bid-log handle.
typedef struct BcDataset BcDataset;

// Opaque fitted-model handle.
typedef struct BcModel BcModel;

// Opaque value-table handle.
typedef struct BcTable BcTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next bidcraft call from the same thread.
const char *bc_last_error(void);

// Library version as a static string.
const char *bc_version(void);

// Frees a string returned by the library. Null is a no-op.
//
// # Safety
// `s` must be null or a pointer previously returned by a `bc_*` call that
// documents this free function, not yet freed.
void bc_string_free(char *s);

// Generates a synthetic bid log. `config_json` follows the CLI's
// `synthetic` section schema.
//
// # Safety
// `config_json` must be a valid NUL-terminated string and `out` a valid
// destination pointer.
enum BcStatus bc_dataset_generate(const char *config_json, struct BcDataset **out);

// Parses a TSV bid log with a JSON column schema file.
//
// # Safety
// Path arguments must be valid NUL-terminated strings; `out` must be a
// valid destination pointer.
enum BcStatus bc_dataset_read_tsv(const char *data_path,
                                  const char *schema_path,
                                  size_t price_levels,
                                  bool strict,
                                  struct BcDataset **out);

// # Safety
// `ds` must be null or a live dataset handle.
size_t bc_dataset_len(const struct BcDataset *ds);

// # Safety
// `ds` must be null or a live dataset handle.
size_t bc_dataset_price_levels(const struct BcDataset *ds);

// # Safety
// `ds` must be null or a live dataset handle.
size_t bc_dataset_censored_count(const struct BcDataset *ds);

// # Safety
// `ds` must be null or a handle from this library, not yet freed.
void bc_dataset_free(struct BcDataset *ds);

// Fits the Kaplan-Meier model.
//
// # Safety
// `ds` must be a live dataset handle and `out` a valid destination.
enum BcStatus bc_model_fit_km(const struct BcDataset *ds, struct BcModel **out);

// Fits the gamma model.
//
// # Safety
// `ds` must be a live dataset handle and `out` a valid destination.
enum BcStatus bc_model_fit_gamma(const struct BcDataset *ds, struct BcModel **out);

// Trains the recurrent forecaster. `train_config_json` follows the CLI's
// `train` section schema; pass `"{}"` for defaults.
//
// # Safety
// `ds` must be a live dataset handle, `train_config_json` a valid string,
// and `out` a valid destination.
enum BcStatus bc_model_fit_forecaster(const struct BcDataset *ds,
                                      const char *train_config_json,
                                      struct BcModel **out);

// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid
// destination pointer.
enum BcStatus bc_model_load(const char *path, struct BcModel **out);

// # Safety
// `model` must be a live model handle and `path` a valid string.
enum BcStatus bc_model_save(const struct BcModel *model, const char *path);

// # Safety
// `model` must be null or a live model handle.
size_t bc_model_price_levels(const struct BcModel *model);

// Writes the model's unconditional price pmf into `out`, which must hold
// `len >= bc_model_price_levels(model)` doubles.
//
// # Safety
// `model` must be a live model handle and `out` writable for `len`
// doubles.
enum BcStatus bc_model_pmf(const struct BcModel *model, double *out, size_t len);

// # Safety
// `model` must be null or a handle from this library, not yet freed.
void bc_model_free(struct BcModel *model);

// Solves the bidding MDP against the model's price distribution.
// `solver_json` follows the CLI's `solver` section schema (budget and
// horizon required); truncation runs when it names `truncate_at`.
//
// # Safety
// `model` must be a live model handle, `solver_json` a valid string, and
// `out` a valid destination.
enum BcStatus bc_solve(const struct BcModel *model,
                       double mean_ctr,
                       const char *solver_json,
                       struct BcTable **out);

// Loads a value table saved by the CLI's solve command.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid
// destination pointer.
enum BcStatus bc_table_load(const char *path, struct BcTable **out);

// Reads one value-table cell.
//
// # Safety
// `table` must be a live table handle and `out` a valid destination.
enum BcStatus bc_table_value(const struct BcTable *table,
                             uint32_t budget,
                             size_t auctions_left,
                             double *out);

// Reads the optimal bid for one cell.
//
// # Safety
// `table` must be a live table handle and `out` a valid destination.
enum BcStatus bc_table_bid(const struct BcTable *table,
                           uint32_t budget,
                           size_t auctions_left,
                           uint32_t *out);

// # Safety
// `table` must be null or a handle from this library, not yet freed.
void bc_table_free(struct BcTable *table);

// Scores a model on a dataset. An undefined AUC (single-class labels)
// comes back as NaN.
//
// # Safety
// Handles must be live; out pointers must be valid destinations.
enum BcStatus bc_evaluate(const struct BcModel *model,
                          const struct BcDataset *ds,
                          double epsilon,
                          double *out_auc,
                          double *out_log_loss,
                          double *out_anlp);

// Derives the per-episode budget from a training log. `episode_json`
// follows the CLI's `episode` section schema; pass `"{}"` for defaults.
//
// # Safety
// `train` must be a live dataset handle, `episode_json` a valid string,
// and `out` a valid destination.
enum BcStatus bc_episode_budget(const struct BcDataset *train,
                                const char *episode_json,
                                uint32_t *out);

// Replays one bidder over the dataset in budget-capped episodes and
// returns the campaign report as a JSON string (free it with
// [`bc_string_free`]). `table` is required for the RLB bidder and ignored
// otherwise.
//
// # Safety
// Handles must be live, `episode_json` a valid string, and `out_json` a
// valid destination.
enum BcStatus bc_simulate(const struct BcDataset *ds,
                          const char *episode_json,
                          enum BcBidder bidder,
                          double param,
                          const struct BcTable *table,
                          uint32_t budget,
                          char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIDCRAFT_H */
