#ifndef PERSONA_WORKBENCH_H
#define PERSONA_WORKBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PwStatus {
  PW_OK = 0,
  PW_NULL_ARGUMENT = 1,
  PW_INVALID_ARGUMENT = 2,
  PW_PARSE_ERROR = 3,
  PW_UNRECOGNIZED_PROMPT = 4,
  PW_RANK_DEFICIENT = 5,
  PW_INSUFFICIENT_DATA = 6,
  PW_CONFIG_ERROR = 7,
  PW_IO_ERROR = 8,
  PW_MISSING_ARTIFACT = 9,
  PW_GATEWAY_ERROR = 10,
  PW_BUDGET_EXCEEDED = 11,
  PW_PANIC = 99,
} PwStatus;

/**
 * Opaque company catalog.
 */
typedef struct PwCatalog PwCatalog;

/**
 * Opaque persona grid.
 */
typedef struct PwGrid PwGrid;

/**
 * Survey composites. `independent_learning` is always present for the
 * survey source; environmental investment is not measured there.
 */
typedef struct PwSurveyBehaviors {
  double independent_learning;
  double impulsivity;
  double risk_appetite;
  double env_interest;
  uint8_t trend_predictability;
} PwSurveyBehaviors;

/**
 * Outcome of [`pw_run_pipeline`].
 */
typedef struct PwRunSummary {
  uint64_t requests;
  size_t units_run;
  size_t units_skipped;
  size_t flagged;
} PwRunSummary;

/**
 * Verdict counts from [`pw_analyze_run`].
 */
typedef struct PwVerdictCounts {
  size_t matched;
  size_t mismatched;
  size_t not_significant;
  size_t no_benchmark;
} PwVerdictCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread; do not free.
 */
const char *pw_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` was returned by this library and is not used afterwards.
 */
void pw_string_free(char *s);

/**
 * All 243 personas in lexicographic O C E A N order.
 */
struct PwGrid *pw_grid_new(void);

/**
 * # Safety
 * `grid` is null or a live handle from [`pw_grid_new`].
 */
size_t pw_grid_len(const struct PwGrid *grid);

/**
 * Persona id such as `L-M-H-H-L` for grid position `index`.
 *
 * # Safety
 * `grid` is a live handle; `out` is valid for a pointer write.
 */
enum PwStatus pw_grid_persona_id(const struct PwGrid *grid, size_t index, char **out);

/**
 * Encoded trait levels (-1, 0, +1) in O C E A N order.
 *
 * # Safety
 * `grid` is a live handle; `out` points to 5 writable `int8_t`.
 */
enum PwStatus pw_grid_encoded(const struct PwGrid *grid, size_t index, int8_t *out);

/**
 * # Safety
 * `grid` is null or a live handle, not used afterwards.
 */
void pw_grid_free(struct PwGrid *grid);

/**
 * The five-company default catalog.
 */
struct PwCatalog *pw_catalog_default(void);

/**
 * Loads a catalog CSV (name, roi, risk, descriptor).
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is valid for a pointer write.
 */
enum PwStatus pw_catalog_load(const char *path, struct PwCatalog **out);

/**
 * # Safety
 * `catalog` is null or a live handle.
 */
size_t pw_catalog_len(const struct PwCatalog *catalog);

/**
 * # Safety
 * `catalog` is a live handle; `out` is valid for a pointer write.
 */
enum PwStatus pw_catalog_name(const struct PwCatalog *catalog, size_t index, char **out);

/**
 * `stake * (1 + roi) * (1 - risk)` for company `index`.
 *
 * # Safety
 * `catalog` is a live handle; `out` is valid for a write.
 */
enum PwStatus pw_expected_value(const struct PwCatalog *catalog,
                                size_t index,
                                double stake,
                                double *out);

/**
 * # Safety
 * `catalog` is null or a live handle, not used afterwards.
 */
void pw_catalog_free(struct PwCatalog *catalog);

/**
 * Behavioral survey prompt for a persona id.
 *
 * # Safety
 * `persona_id` is a NUL-terminated string; `out` is valid for a pointer write.
 */
enum PwStatus pw_render_survey_prompt(const char *persona_id, char **out);

/**
 * BFI prompt for a persona id.
 *
 * # Safety
 * As [`pw_render_survey_prompt`].
 */
enum PwStatus pw_render_bfi_prompt(const char *persona_id, char **out);

/**
 * Simulation prompt. `tally` holds one research count per catalog company,
 * in catalog order.
 *
 * # Safety
 * `catalog` is a live handle; `tally` points to `pw_catalog_len(catalog)`
 * readable bytes; other pointers as [`pw_render_survey_prompt`].
 */
enum PwStatus pw_render_sim_prompt(const char *persona_id,
                                   const struct PwCatalog *catalog,
                                   const uint8_t *tally,
                                   bool forced,
                                   char **out);

/**
 * First JSON object in free-form model text, re-serialized compactly.
 *
 * # Safety
 * `raw` is a NUL-terminated string; `out` is valid for a pointer write.
 */
enum PwStatus pw_extract_json(const char *raw, char **out);

/**
 * Deterministic mock persona reply for a rendered prompt.
 *
 * # Safety
 * `prompt` is a NUL-terminated string; `out` is valid for a pointer write.
 */
enum PwStatus pw_mock_respond(const char *prompt, uint64_t seed, char **out);

/**
 * Composites from nine survey answers.
 *
 * # Safety
 * `answers` points to 9 readable bytes; `out` is valid for a write.
 */
enum PwStatus pw_survey_behaviors(const uint8_t *answers, struct PwSurveyBehaviors *out);

/**
 * Two-sided Student-t tail probability. Returns NaN when `df` is 0.
 */
double pw_student_t_p(double t, uint32_t df);

/**
 * Least squares on an `n` x `k` row-major design (include an intercept
 * column yourself). Each output array holds `k` values.
 *
 * # Safety
 * `x` holds `n * k` doubles, `y` holds `n`; each non-null output holds `k`.
 */
enum PwStatus pw_ols(const double *x,
                     size_t n,
                     size_t k,
                     const double *y,
                     double *beta,
                     double *stderr,
                     double *p);

/**
 * Runs the full pipeline from TOML configuration text (same keys as the
 * CLI config file). An empty string selects all defaults.
 *
 * # Safety
 * `config_toml` is a NUL-terminated string; `out` is null or valid for a write.
 */
enum PwStatus pw_run_pipeline(const char *config_toml, struct PwRunSummary *out);

/**
 * Re-runs analysis on a run directory, rewriting its coefficient and sign
 * report files.
 *
 * # Safety
 * `dir` is a NUL-terminated string; `out` is null or valid for a write.
 */
enum PwStatus pw_analyze_run(const char *dir, double alpha, struct PwVerdictCounts *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERSONA_WORKBENCH_H */
