#ifndef RELQ_H
#define RELQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RelqStatus {
  RELQ_STATUS_OK = 0,
  RELQ_STATUS_NULL_POINTER = 1,
  RELQ_STATUS_INVALID_UTF8 = 2,
  RELQ_STATUS_INVALID_ARGUMENT = 3,
  RELQ_STATUS_PARSE = 4,
  RELQ_STATUS_IO = 5,
  RELQ_STATUS_OUT_OF_RANGE = 6,
  RELQ_STATUS_PANIC = 7,
} RelqStatus;

typedef enum RelqAction {
  RELQ_ACTION_UP = 0,
  RELQ_ACTION_DOWN = 1,
  RELQ_ACTION_LEFT = 2,
  RELQ_ACTION_RIGHT = 3,
} RelqAction;

typedef enum RelqAlgorithm {
  RELQ_ALGORITHM_CONVENTIONAL = 0,
  RELQ_ALGORITHM_RELATIVE = 1,
} RelqAlgorithm;

/**
 * Opaque grid handle.
 */
typedef struct RelqGrid RelqGrid;

/**
 * Opaque Q-table handle.
 */
typedef struct RelqQTable RelqQTable;

/**
 * Opaque training run: one table, one random stream, and the per-episode
 * records produced so far.
 */
typedef struct RelqTrainer RelqTrainer;

typedef struct RelqTransition {
  size_t row;
  size_t col;
  enum RelqAction action;
  double reward;
  size_t next_row;
  size_t next_col;
  bool terminal;
} RelqTransition;

typedef struct RelqAgentParams {
  double alpha;
  double gamma;
  double epsilon;
  uint64_t seed;
  /**
   * 0 selects the default cap of 4 * width * height.
   */
  size_t max_steps_per_episode;
  enum RelqAlgorithm algorithm;
} RelqAgentParams;

typedef struct RelqEpisodeRecord {
  size_t episode;
  size_t steps;
  double discounted_return;
  double max_q_delta;
  double sum_q;
  bool reached_goal;
} RelqEpisodeRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or an empty
 * string. The pointer stays valid until the next `relq_*` call on this
 * thread.
 */
const char *relq_last_error_message(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer returned by a `relq_*` function that is
 * documented to return an owned string, not yet freed.
 */
void relq_string_free(char *s);

/**
 * Parse and validate a grid from its JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RelqStatus relq_grid_from_json(const char *json, struct RelqGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from `relq_grid_from_json`, not yet freed.
 */
void relq_grid_free(struct RelqGrid *grid);

/**
 * Owned JSON string (release with `relq_string_free`), or null if `grid`
 * is null.
 *
 * # Safety
 * `grid` must be null or a live grid handle.
 */
char *relq_grid_to_json(const struct RelqGrid *grid);

/**
 * Number of free cells, or 0 if `grid` is null.
 *
 * # Safety
 * `grid` must be null or a live grid handle.
 */
size_t relq_grid_num_states(const struct RelqGrid *grid);

/**
 * Apply one move.
 *
 * # Safety
 * `grid` must be a live grid handle; `out` must be writable.
 */
enum RelqStatus relq_grid_step(const struct RelqGrid *grid,
                               size_t row,
                               size_t col,
                               enum RelqAction action,
                               struct RelqTransition *out);

/**
 * Fill `out` with the default parameters for `grid`: alpha = gamma = 0.8,
 * epsilon = 0.2, seed 0, step cap 4 * width * height.
 *
 * # Safety
 * `grid` must be a live grid handle; `out` must be writable.
 */
enum RelqStatus relq_agent_params_default(const struct RelqGrid *grid,
                                          enum RelqAlgorithm algorithm,
                                          struct RelqAgentParams *out);

/**
 * Start a training run with a zero table.
 *
 * # Safety
 * `grid` must be a live grid handle, `params` readable, `out` writable.
 */
enum RelqStatus relq_trainer_new(const struct RelqGrid *grid,
                                 const struct RelqAgentParams *params,
                                 struct RelqTrainer **out);

/**
 * # Safety
 * `trainer` must be null or a live trainer handle.
 */
void relq_trainer_free(struct RelqTrainer *trainer);

/**
 * Run `episodes` more episodes.
 *
 * # Safety
 * `trainer` must be a live trainer handle not used concurrently.
 */
enum RelqStatus relq_trainer_run(struct RelqTrainer *trainer, size_t episodes);

/**
 * Episodes completed so far, or 0 if `trainer` is null.
 *
 * # Safety
 * `trainer` must be null or a live trainer handle.
 */
size_t relq_trainer_episode_count(const struct RelqTrainer *trainer);

/**
 * Metrics of episode `index` (0-based position, 1-based `episode` field).
 *
 * # Safety
 * `trainer` must be a live trainer handle; `out` must be writable.
 */
enum RelqStatus relq_trainer_record(const struct RelqTrainer *trainer,
                                    size_t index,
                                    struct RelqEpisodeRecord *out);

/**
 * Copy of the trainer's current table as a new handle.
 *
 * # Safety
 * `trainer` must be a live trainer handle; `out` must be writable.
 */
enum RelqStatus relq_trainer_qtable(const struct RelqTrainer *trainer, struct RelqQTable **out);

/**
 * Exact Q* by value iteration.
 *
 * # Safety
 * `grid` must be a live grid handle; `out` must be writable.
 */
enum RelqStatus relq_value_iteration(const struct RelqGrid *grid,
                                     double gamma,
                                     double tol,
                                     struct RelqQTable **out);

/**
 * # Safety
 * `table` must be null or a live table handle.
 */
void relq_qtable_free(struct RelqQTable *table);

/**
 * # Safety
 * `table` must be a live table handle; `out` must be writable.
 */
enum RelqStatus relq_qtable_get(const struct RelqQTable *table,
                                size_t row,
                                size_t col,
                                enum RelqAction action,
                                double *out);

/**
 * # Safety
 * `table` must be a live table handle; `out` must be writable.
 */
enum RelqStatus relq_qtable_max_q(const struct RelqQTable *table,
                                  size_t row,
                                  size_t col,
                                  double *out);

/**
 * # Safety
 * `table` must be a live table handle; `out` must be writable.
 */
enum RelqStatus relq_qtable_argmax(const struct RelqQTable *table,
                                   size_t row,
                                   size_t col,
                                   enum RelqAction *out);

/**
 * Largest absolute entrywise difference between two tables over the same
 * grid.
 *
 * # Safety
 * `a` and `b` must be live table handles; `out` must be writable.
 */
enum RelqStatus relq_qtable_sup_norm(const struct RelqQTable *a,
                                     const struct RelqQTable *b,
                                     double *out);

/**
 * The table as CSV (`row,col,up,down,left,right`). Owned string, or null if
 * `table` is null.
 *
 * # Safety
 * `table` must be null or a live table handle.
 */
char *relq_qtable_to_csv(const struct RelqQTable *table);

/**
 * Σ gamma^k · rewards[k].
 *
 * # Safety
 * `rewards` must point to `len` readable doubles (or be null with `len` 0);
 * `out` must be writable.
 */
enum RelqStatus relq_discounted_return(const double *rewards,
                                       size_t len,
                                       double gamma,
                                       double *out);

/**
 * First 1-based episode after which `window` consecutive deltas stay below
 * `tol`. `*found` is false when there is none, and `*episode` is then 0.
 *
 * # Safety
 * `deltas` must point to `len` readable doubles (or be null with `len` 0);
 * `episode` and `found` must be writable.
 */
enum RelqStatus relq_detect_convergence(const double *deltas,
                                        size_t len,
                                        double tol,
                                        size_t window,
                                        size_t *episode,
                                        bool *found);

/**
 * Run both algorithms over every seed of the config file and write curves,
 * tables, Q* and `summary.csv` under `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum RelqStatus relq_compare(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELQ_H */
