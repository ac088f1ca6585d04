/* C API for the cuerank shared library: opaque handles plus integer status
 * codes. Every function returns CUERANK_OK on success; on failure the
 * thread-local message behind cuerank_last_error() describes what went wrong.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with cuerank_string_free(). */

#ifndef CUERANK_CUERANK_H
#define CUERANK_CUERANK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CUERANK_API __declspec(dllexport)
#else
#define CUERANK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cuerank_status {
    CUERANK_OK = 0,
    CUERANK_ERR_INVALID_ARGUMENT = 1,
    CUERANK_ERR_DIMENSION_MISMATCH = 2,
    CUERANK_ERR_IO = 3,
    CUERANK_ERR_PARSE = 4,
    CUERANK_ERR_SINGULAR_COVARIANCE = 5,
    CUERANK_ERR_CONFIG = 6,
    CUERANK_ERR_MISSING_DATA = 7,
    CUERANK_ERR_INTERNAL = 8
} cuerank_status;

typedef struct cuerank_cca_model cuerank_cca_model;

CUERANK_API const char* cuerank_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
CUERANK_API const char* cuerank_last_error(void);

CUERANK_API void cuerank_string_free(char* s);

/* ------------------------------------------------------------------ */
/* CCA models                                                          */
/* ------------------------------------------------------------------ */

/* Fits a model from row-major sample matrices (n x dim_x, n x dim_y).
 * components = 0 picks min(dim_x, dim_y, 300). ridge_scaled_by_trace != 0
 * makes `regularization` a multiplier on trace(C)/dim per view; otherwise it
 * is added to the covariance diagonal as-is. */
CUERANK_API cuerank_status cuerank_cca_fit(const double* x, const double* y, uint32_t n,
                                           uint32_t dim_x, uint32_t dim_y, double regularization,
                                           int ridge_scaled_by_trace, uint32_t components,
                                           double correlation_power, cuerank_cca_model** out);

CUERANK_API cuerank_status cuerank_cca_load(const char* path, cuerank_cca_model** out);
CUERANK_API cuerank_status cuerank_cca_save(const cuerank_cca_model* model, const char* path);
CUERANK_API void cuerank_cca_free(cuerank_cca_model* model);

CUERANK_API uint32_t cuerank_cca_dim_x(const cuerank_cca_model* model);
CUERANK_API uint32_t cuerank_cca_dim_y(const cuerank_cca_model* model);
CUERANK_API uint32_t cuerank_cca_components(const cuerank_cca_model* model);

/* out must hold cuerank_cca_components(model) doubles. */
CUERANK_API cuerank_status cuerank_cca_correlations(const cuerank_cca_model* model, double* out);

/* out must hold cuerank_cca_components(model) doubles. */
CUERANK_API cuerank_status cuerank_cca_project_x(const cuerank_cca_model* model, const double* v,
                                                 uint32_t len, double* out);
CUERANK_API cuerank_status cuerank_cca_project_y(const cuerank_cca_model* model, const double* v,
                                                 uint32_t len, double* out);

CUERANK_API cuerank_status cuerank_cca_similarity(const cuerank_cca_model* model,
                                                  const double* x_vec, uint32_t x_len,
                                                  const double* y_vec, uint32_t y_len,
                                                  double* out);

/* ------------------------------------------------------------------ */
/* Score combination                                                   */
/* ------------------------------------------------------------------ */

/* Mean over an n x m row-major matrix of cosines, each raised to power p. */
CUERANK_API cuerank_status cuerank_kernel_score(const double* cosines, uint32_t n, uint32_t m,
                                                double p, double* out);

/* out must hold cue_count doubles; preferred cue gets 1-(C-1)*0.1. */
CUERANK_API cuerank_status cuerank_combination_weights(uint32_t cue_count,
                                                       uint32_t preferred_index, double* out);

/* per_cue is cue_count x 4 row-major; out holds 4 doubles. */
CUERANK_API cuerank_status cuerank_combine_scores(const double* per_cue, uint32_t cue_count,
                                                  const double* weights, double* out);

CUERANK_API cuerank_status cuerank_choose_answer(const double* combined4, uint32_t* out_index);

/* out = 0.9 * combined + 0.1 * auxiliary, elementwise over 4 entries. */
CUERANK_API cuerank_status cuerank_attach_auxiliary(const double* combined4,
                                                    const double* auxiliary4, double* out);

/* ------------------------------------------------------------------ */
/* Pipeline commands (drive the CLI)                                   */
/* ------------------------------------------------------------------ */

typedef struct cuerank_run_options {
    int64_t seed;           /* < 0: use the config value */
    int32_t threads;        /* < 0: use the config value; 0: all cores */
    int32_t csv;            /* nonzero: CSV table output */
    const char* json_scores_path; /* NULL: no per-question score dump */
} cuerank_run_options;

CUERANK_API cuerank_status cuerank_run_fit(const char* config_path,
                                           const cuerank_run_options* options, char** out_report);
CUERANK_API cuerank_status cuerank_run_eval(const char* config_path,
                                            const cuerank_run_options* options, char** out_table);
CUERANK_API cuerank_status cuerank_run_synth(const char* config_path,
                                             const cuerank_run_options* options,
                                             char** out_report);
CUERANK_API cuerank_status cuerank_run_select_regions(const char* config_path,
                                                      const cuerank_run_options* options,
                                                      const char* image_id,
                                                      const char* answer_text, char** out_report);
CUERANK_API cuerank_status cuerank_inspect_model(const char* model_path, char** out_report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CUERANK_CUERANK_H */
