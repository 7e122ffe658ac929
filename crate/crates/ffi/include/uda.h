#ifndef UDA_H
#define UDA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UdaStatus {
  UDA_STATUS_OK = 0,
  UDA_STATUS_NULL_POINTER = 1,
  UDA_STATUS_INVALID_UTF8 = 2,
  UDA_STATUS_PARSE_ERROR = 3,
  UDA_STATUS_INVALID_INPUT = 4,
  UDA_STATUS_COMPUTE_ERROR = 5,
  UDA_STATUS_PANIC = 6,
} UdaStatus;

typedef enum UdaVerdictKind {
  UDA_VERDICT_KIND_ROBUST = 0,
  UDA_VERDICT_KIND_NOT_ROBUST = 10,
  UDA_VERDICT_KIND_NOT_UDA = 20,
} UdaVerdictKind;

/**
 * A target state description.
 */
typedef struct UdaState UdaState;

/**
 * A collection of qubit subsets whose marginals are known.
 */
typedef struct UdaSubsystems UdaSubsystems;

/**
 * Result of `uda_certify`.
 */
typedef struct UdaVerdict UdaVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *uda_last_error(void);

/**
 * Static version string.
 */
const char *uda_version(void);

/**
 * Parses a state description such as `{"kind": "dicke", "n": 4, "k": 2}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum UdaStatus uda_state_from_json(const char *json, struct UdaState **out);

/**
 * # Safety
 * `state` must come from `uda_state_from_json` and not be used afterwards.
 */
void uda_state_free(struct UdaState *state);

/**
 * Parses `{"n": 3, "subsets": [[1, 2], [2, 3]]}` (1-based qubits).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum UdaStatus uda_subsystems_from_json(const char *json, struct UdaSubsystems **out);

/**
 * # Safety
 * `s` must come from `uda_subsystems_from_json` and not be used afterwards.
 */
void uda_subsystems_free(struct UdaSubsystems *s);

/**
 * Dimension of the space of traceless operators invisible to every marginal.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum UdaStatus uda_kernel_dim(const struct UdaSubsystems *s, size_t *out);

/**
 * Runs the certification pipeline with default tolerances.
 *
 * # Safety
 * `state` and `s` must be live handles; `out` must be writable.
 */
enum UdaStatus uda_certify(const struct UdaState *state,
                           const struct UdaSubsystems *s,
                           struct UdaVerdict **out);

/**
 * # Safety
 * `v` must be a live handle; `out` must be writable.
 */
enum UdaStatus uda_verdict_kind(const struct UdaVerdict *v, enum UdaVerdictKind *out);

/**
 * Full verdict as JSON; free the result with `uda_string_free`.
 *
 * # Safety
 * `v` must be a live handle; `out` must be writable.
 */
enum UdaStatus uda_verdict_to_json(const struct UdaVerdict *v, char **out);

/**
 * # Safety
 * `v` must come from `uda_certify` and not be used afterwards.
 */
void uda_verdict_free(struct UdaVerdict *v);

/**
 * Largest total pair-marginal distance that certifies GME for `D(n,k)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum UdaStatus uda_gme_threshold(size_t n, size_t k, double *out);

/**
 * Evaluates measured pair marginals against `D(n,k)`. `report_json` may be
 * null; otherwise it receives the report, freed with `uda_string_free`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; non-null out-pointers must be
 * writable.
 */
enum UdaStatus uda_gme_evaluate(const char *json,
                                size_t n,
                                size_t k,
                                bool *certified,
                                char **report_json);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void uda_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UDA_H */
