#ifndef EQUIDIST_H
#define EQUIDIST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero values mirror the library's error kinds.
 */
typedef enum {
  EQ_STATUS_OK = 0,
  EQ_STATUS_NULL_POINTER = 1,
  EQ_STATUS_UTF8 = 2,
  EQ_STATUS_INVALID_INPUT = 3,
  EQ_STATUS_BUDGET_EXCEEDED = 4,
  EQ_STATUS_MODULUS_TOO_LARGE = 5,
  EQ_STATUS_NOT_ADMISSIBLE = 6,
  EQ_STATUS_BEYOND_V_UNDEFINED = 7,
  EQ_STATUS_ZERO_DENSITY = 8,
  EQ_STATUS_CONSTANT_INPUT = 9,
  EQ_STATUS_MATH = 10,
  EQ_STATUS_PANIC = 11,
} EqStatus;

/**
 * Verdict of the equidistribution criterion.
 */
typedef enum {
  EQ_VERDICT_IN = 0,
  EQ_VERDICT_OUT = 1,
  EQ_VERDICT_UNKNOWN = 2,
  EQ_VERDICT_NOT_ADMISSIBLE = 3,
} EqVerdict;

/**
 * Opaque family of multiplicative functions.
 */
typedef struct EqFamily EqFamily;

/**
 * Opaque result of a sieve run.
 */
typedef struct EqSieveReport EqSieveReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next call.
 */
const char *eq_last_error(void);

/**
 * Create a family from a preset name (phi, sigma, sigma_r:<r>, phi_sigma_joint) with `v` levels.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
EqStatus eq_family_from_preset(const char *name, uintptr_t v, EqFamily **out);

/**
 * Create a family from the text of a TOML spec file.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
EqStatus eq_family_from_toml(const char *toml, EqFamily **out);

/**
 * # Safety
 * `family` must come from an `eq_family_*` constructor and not be used afterwards.
 */
void eq_family_free(EqFamily *family);

/**
 * Number of functions K in the family.
 *
 * # Safety
 * `family` must be a live handle or null (returns 0).
 */
uintptr_t eq_family_k(const EqFamily *family);

/**
 * Least admissible index k for q, or 0 when none exists up to V.
 *
 * # Safety
 * `family` must be a live handle or null (returns 0).
 */
uintptr_t eq_admissible_k(const EqFamily *family, uint64_t q);

/**
 * Decide weak equidistribution mod q. `prime_budget` 0 selects the default.
 * `json_out` may be null; otherwise it receives the full verdict as JSON.
 *
 * # Safety
 * `family` must be a live handle, `verdict` a valid pointer and `json_out` null or valid.
 */
EqStatus eq_check_criterion(const EqFamily *family,
                            uint64_t q,
                            uint64_t prime_budget,
                            EqVerdict *verdict,
                            char **json_out);

/**
 * Sieve n <= x and tabulate the residues mod q. `filter` uses the CLI syntax
 * (none, pr:R, pt-nk:T, convenient, prime-power); null means none.
 *
 * # Safety
 * `family` must be a live handle, `filter` null or NUL-terminated, `out` valid.
 */
EqStatus eq_sieve_run(const EqFamily *family,
                      uint64_t x,
                      uint64_t q,
                      uint32_t k,
                      const char *filter,
                      EqSieveReport **out);

/**
 * # Safety
 * `report` must be a live handle or null.
 */
uint64_t eq_sieve_report_coprime_total(const EqSieveReport *report);

/**
 * Max relative deviation; negative when nothing passed the filter.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
double eq_sieve_report_discrepancy(const EqSieveReport *report);

/**
 * Count of the residue tuple `tuple[0..len]`.
 *
 * # Safety
 * `report` must be a live handle and `tuple` point to `len` values.
 */
uint64_t eq_sieve_report_count(const EqSieveReport *report, const uint64_t *tuple, uintptr_t len);

/**
 * The whole report as JSON.
 *
 * # Safety
 * `report` must be a live handle and `json_out` valid.
 */
EqStatus eq_sieve_report_json(const EqSieveReport *report, char **json_out);

/**
 * # Safety
 * `report` must come from `eq_sieve_run` and not be used afterwards.
 */
void eq_sieve_report_free(EqSieveReport *report);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void eq_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUIDIST_H */
