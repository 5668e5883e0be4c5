#ifndef PSRO_H
#define PSRO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsroStatus {
  PSRO_STATUS_OK = 0,
  PSRO_STATUS_NULL_POINTER = 1,
  PSRO_STATUS_INVALID_ARGUMENT = 2,
  PSRO_STATUS_CONFIG_ERROR = 3,
  PSRO_STATUS_NO_EQUILIBRIUM = 4,
  PSRO_STATUS_IO_ERROR = 5,
  PSRO_STATUS_CORRUPT_CHECKPOINT = 6,
  PSRO_STATUS_BUFFER_TOO_SMALL = 7,
  PSRO_STATUS_RUNTIME_ERROR = 8,
  PSRO_STATUS_PANIC = 9,
} PsroStatus;

// Opaque run handle.
typedef struct PsroRun PsroRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t psro_last_error_message(char *buf, size_t len);

// Creates a run from TOML config text. Relative paths resolve against the
// current directory.
//
// # Safety
// `config_toml` must be a NUL-terminated string; `out` must be writable.
enum PsroStatus psro_run_new(const char *config_toml, struct PsroRun **out);

// Restores a run from a checkpoint directory.
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum PsroStatus psro_run_resume(const char *dir, struct PsroRun **out);

// Releases a run. Null is ignored.
//
// # Safety
// `run` must be null or a handle from this library that has not been freed.
void psro_run_free(struct PsroRun *run);

// Runs one epoch. `advanced` is set to false once the run has finished.
//
// # Safety
// `run` must be a live handle; `advanced` must be writable.
enum PsroStatus psro_run_step(struct PsroRun *run, bool *advanced);

// Runs all remaining epochs.
//
// # Safety
// `run` must be a live handle.
enum PsroStatus psro_run_run(struct PsroRun *run);

// Completed epochs (0 right after creation).
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsroStatus psro_run_epoch(const struct PsroRun *run, size_t *out);

// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsroStatus psro_run_n_players(const struct PsroRun *run, size_t *out);

// Cumulative learner timesteps.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsroStatus psro_run_training_steps(const struct PsroRun *run, uint64_t *out);

// Writes the current solution mixture of `player` into `weights`. `written`
// receives the mixture length, also when the buffer is too small.
//
// # Safety
// `run` must be a live handle; `weights` must be valid for `len` doubles;
// `written` must be writable.
enum PsroStatus psro_run_solution(const struct PsroRun *run,
                                  size_t player,
                                  double *weights,
                                  size_t len,
                                  size_t *written);

// SumRegret of the current solution within the empirical game.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsroStatus psro_run_enfg_sum_regret(const struct PsroRun *run, double *out);

// Exact SumRegret in the underlying game; matrix games only.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsroStatus psro_run_game_sum_regret(const struct PsroRun *run, double *out);

// Writes a resumable checkpoint to `dir`.
//
// # Safety
// `run` must be a live handle; `dir` must be a NUL-terminated string.
enum PsroStatus psro_run_checkpoint(const struct PsroRun *run, const char *dir);

// Nash equilibrium of a bimatrix game by support enumeration.
//
// `a` and `b` hold row-major `rows x cols` payoffs for the row and column player.
// `x` receives `rows` weights and `y` receives `cols` weights.
//
// # Safety
// `a` and `b` must be valid for `rows * cols` doubles, `x` for `rows`, `y` for `cols`.
enum PsroStatus psro_solve_nash_bimatrix(size_t rows,
                                         size_t cols,
                                         const double *a,
                                         const double *b,
                                         double *x,
                                         double *y);

// Library version as a static NUL-terminated string.
const char *psro_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSRO_H */
