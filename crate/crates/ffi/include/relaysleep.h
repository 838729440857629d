#ifndef RELAYSLEEP_H
#define RELAYSLEEP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum RsStatus {
  RS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RS_STATUS_NULL_POINTER = 1,
  /**
   * Malformed JSON, bad UTF-8, or a scenario that fails validation.
   */
  RS_STATUS_INVALID_INPUT = 2,
  /**
   * The exact solver's joint state space is over budget.
   */
  RS_STATUS_BUDGET_EXCEEDED = 3,
  /**
   * The model cannot be evaluated (zero traffic, unstable load, ...).
   */
  RS_STATUS_INFEASIBLE = 4,
  /**
   * Slot or relay index outside the policy, or a short buffer.
   */
  RS_STATUS_OUT_OF_RANGE = 5,
  /**
   * Unexpected internal failure; the library caught a panic.
   */
  RS_STATUS_INTERNAL = 6,
} RsStatus;

typedef enum RsAlgorithm {
  RS_ALGORITHM_EXACT_DP = 0,
  RS_ALGORITHM_REDUCED_DP = 1,
  RS_ALGORITHM_GREEDY = 2,
} RsAlgorithm;

/**
 * Opaque solved-policy handle.
 */
typedef struct RsPolicy RsPolicy;

/**
 * Opaque scenario handle.
 */
typedef struct RsScenario RsScenario;

/**
 * Headline figures of a solved policy.
 */
typedef struct RsTotals {
  /**
   * Weighted objective: grid energy plus ψ-weighted blocking.
   */
  double weighted_cost;
  double total_grid_energy_j;
  double mean_grid_power_w;
  double mean_blocking;
  size_t clamped_actions;
} RsTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the built-in 24-slot, six-relay scenario.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum RsStatus rs_scenario_default(struct RsScenario **out);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RsStatus rs_scenario_from_json(const char *json, struct RsScenario **out);

/**
 * Serialises a scenario to pretty-printed JSON. Release with [`rs_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum RsStatus rs_scenario_to_json(const struct RsScenario *scenario, char **out);

/**
 * Sets the blocking weight ψ.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum RsStatus rs_scenario_set_psi(struct RsScenario *scenario, double psi);

/**
 * Number of slots, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t rs_scenario_slots(const struct RsScenario *scenario);

/**
 * Number of relays, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t rs_scenario_relays(const struct RsScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void rs_scenario_free(struct RsScenario *scenario);

/**
 * Solves a scenario. The scenario handle stays owned by the caller.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum RsStatus rs_solve(const struct RsScenario *scenario,
                       enum RsAlgorithm algorithm,
                       struct RsPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void rs_policy_free(struct RsPolicy *policy);

/**
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t rs_policy_slots(const struct RsPolicy *policy);

/**
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t rs_policy_relays(const struct RsPolicy *policy);

/**
 * Applied sleep ratio of one relay in one slot.
 *
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum RsStatus rs_policy_sleep(const struct RsPolicy *policy,
                              size_t slot,
                              size_t relay,
                              double *out);

/**
 * Copies the slots x relays sleep matrix, row-major, into `buf`.
 *
 * # Safety
 * `policy` must be a live handle; `buf` must hold `len` doubles.
 */
enum RsStatus rs_policy_sleep_matrix(const struct RsPolicy *policy, double *buf, size_t len);

/**
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum RsStatus rs_policy_totals(const struct RsPolicy *policy, struct RsTotals *out);

/**
 * Run summary as JSON, same fields as the CLI's `summary.json`.
 * Release with [`rs_string_free`].
 *
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum RsStatus rs_policy_summary_json(const struct RsPolicy *policy, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void rs_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *rs_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAYSLEEP_H */
