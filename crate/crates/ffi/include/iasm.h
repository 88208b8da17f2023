#ifndef IASM_H
#define IASM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum IasmStatus {
  IASM_STATUS_OK = 0,
  IASM_STATUS_NULL_POINTER = 1,
  IASM_STATUS_INVALID_UTF8 = 2,
  /**
   * Program, state or scenario text was rejected.
   */
  IASM_STATUS_LOAD = 3,
  /**
   * A request was malformed (bad JSON, unknown element, ...).
   */
  IASM_STATUS_INVALID = 4,
  /**
   * The machine is not in the phase the call needs.
   */
  IASM_STATUS_WRONG_PHASE = 5,
  /**
   * The engine panicked; the handle should not be used again.
   */
  IASM_STATUS_PANIC = 6,
} IasmStatus;

/**
 * A stepping machine driven by the caller.
 */
typedef struct IasmMachine IasmMachine;

/**
 * A checked, desugared program.
 */
typedef struct IasmProgram IasmProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *iasm_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void iasm_string_free(char *s);

/**
 * Validates a program and writes its diagnostics as a JSON array to
 * `*out_json`. Sets `*out_ok` to 1 when the program has no errors.
 *
 * # Safety
 * Pointers must be valid; `source` must be NUL-terminated.
 */
enum IasmStatus iasm_check(const char *source, char **out_json, int32_t *out_ok);

/**
 * Loads a program. Free the result with [`iasm_program_free`].
 *
 * # Safety
 * Pointers must be valid; `source` must be NUL-terminated.
 */
enum IasmStatus iasm_program_load(const char *source, struct IasmProgram **out);

/**
 * # Safety
 * `p` must come from [`iasm_program_load`] and not be freed twice.
 */
void iasm_program_free(struct IasmProgram *p);

/**
 * Runs to the end and writes the text trace to `*out_trace` and the
 * command line exit code (0 halted, 2 failed, 3 stuck, 4 limit) to
 * `*out_exit`. With a scenario the environment is scripted; without one
 * it answers randomly from `true,false` when `use_seed` is nonzero and
 * stays silent otherwise. Zero limits take the defaults.
 *
 * # Safety
 * Pointers must be valid; `scenario` may be null.
 */
enum IasmStatus iasm_run(const struct IasmProgram *program,
                         const char *state,
                         const char *scenario,
                         int32_t use_seed,
                         uint64_t seed,
                         size_t max_steps,
                         size_t max_rounds,
                         char **out_trace,
                         int32_t *out_exit);

/**
 * Creates a machine in step 1. Free it with [`iasm_machine_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum IasmStatus iasm_machine_new(const struct IasmProgram *program,
                                 const char *state,
                                 size_t max_steps,
                                 size_t max_rounds,
                                 struct IasmMachine **out);

/**
 * # Safety
 * `m` must come from [`iasm_machine_new`] and not be freed twice.
 */
void iasm_machine_free(struct IasmMachine *m);

/**
 * Writes the machine status as JSON, in the same shape the HTTP service
 * returns.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IasmStatus iasm_machine_status(struct IasmMachine *m, char **out_json);

/**
 * Posts one round, given as a JSON array of `{"query", "value"}`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IasmStatus iasm_machine_round(struct IasmMachine *m, const char *replies_json);

/**
 * Ends the current step as stuck.
 *
 * # Safety
 * `m` must be valid.
 */
enum IasmStatus iasm_machine_stuck(struct IasmMachine *m);

/**
 * Delivers late replies (same JSON shape as a round) and starts the next
 * step.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IasmStatus iasm_machine_boundary(struct IasmMachine *m, const char *deliveries_json);

/**
 * Writes the trace so far as text lines.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IasmStatus iasm_machine_trace(struct IasmMachine *m, char **out_text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IASM_H */
