#include "cuerank/cuerank.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "cuerank/cca.hpp"
#include "cuerank/ensemble.hpp"
#include "cuerank/pipeline.hpp"
#include "cuerank/regions.hpp"

using namespace cuerank;

struct cuerank_cca_model {
    CcaModel model;
};

namespace {

thread_local std::string g_last_error;

cuerank_status status_from_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return CUERANK_ERR_INVALID_ARGUMENT;
        case ErrorCode::dimension_mismatch: return CUERANK_ERR_DIMENSION_MISMATCH;
        case ErrorCode::io: return CUERANK_ERR_IO;
        case ErrorCode::parse: return CUERANK_ERR_PARSE;
        case ErrorCode::singular_covariance: return CUERANK_ERR_SINGULAR_COVARIANCE;
        case ErrorCode::config: return CUERANK_ERR_CONFIG;
        case ErrorCode::missing_data: return CUERANK_ERR_MISSING_DATA;
        case ErrorCode::internal: return CUERANK_ERR_INTERNAL;
    }
    return CUERANK_ERR_INTERNAL;
}

template <typename Fn>
cuerank_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return CUERANK_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_from_code(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CUERANK_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CUERANK_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return CUERANK_ERR_INTERNAL;
    }
}

cuerank_status fail_invalid(const char* message) {
    g_last_error = message;
    return CUERANK_ERR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

RunOptions to_run_options(const cuerank_run_options* options) {
    RunOptions opt;
    if (!options) return opt;
    if (options->seed >= 0) opt.seed = static_cast<std::uint64_t>(options->seed);
    if (options->threads >= 0) opt.threads = options->threads; // 0 = all cores
    opt.format = options->csv ? TableFormat::csv : TableFormat::text;
    if (options->json_scores_path) opt.json_scores_path = options->json_scores_path;
    return opt;
}

} // namespace

extern "C" {

const char* cuerank_version(void) { return "cuerank 0.1.0"; }

const char* cuerank_last_error(void) { return g_last_error.c_str(); }

void cuerank_string_free(char* s) { delete[] s; }

cuerank_status cuerank_cca_fit(const double* x, const double* y, uint32_t n, uint32_t dim_x,
                               uint32_t dim_y, double regularization, int ridge_scaled_by_trace,
                               uint32_t components, double correlation_power,
                               cuerank_cca_model** out) {
    if (!x || !y || !out) return fail_invalid("cuerank_cca_fit: null argument");
    return guarded([&] {
        DenseMatrix xm(n, dim_x);
        DenseMatrix ym(n, dim_y);
        std::memcpy(xm.values.data(), x, sizeof(double) * n * dim_x);
        std::memcpy(ym.values.data(), y, sizeof(double) * n * dim_y);
        CcaConfig cfg;
        cfg.regularization = regularization;
        cfg.ridge_mode =
            ridge_scaled_by_trace ? RidgeMode::scaled_by_trace : RidgeMode::absolute;
        cfg.components = components;
        cfg.correlation_power = correlation_power;
        *out = new cuerank_cca_model{fit_cca(xm, ym, cfg)};
    });
}

cuerank_status cuerank_cca_load(const char* path, cuerank_cca_model** out) {
    if (!path || !out) return fail_invalid("cuerank_cca_load: null argument");
    return guarded([&] { *out = new cuerank_cca_model{load_cca_model(path)}; });
}

cuerank_status cuerank_cca_save(const cuerank_cca_model* model, const char* path) {
    if (!model || !path) return fail_invalid("cuerank_cca_save: null argument");
    return guarded([&] { save_cca_model(model->model, path); });
}

void cuerank_cca_free(cuerank_cca_model* model) { delete model; }

uint32_t cuerank_cca_dim_x(const cuerank_cca_model* model) {
    return model ? static_cast<uint32_t>(model->model.dim_x()) : 0;
}

uint32_t cuerank_cca_dim_y(const cuerank_cca_model* model) {
    return model ? static_cast<uint32_t>(model->model.dim_y()) : 0;
}

uint32_t cuerank_cca_components(const cuerank_cca_model* model) {
    return model ? static_cast<uint32_t>(model->model.components()) : 0;
}

cuerank_status cuerank_cca_correlations(const cuerank_cca_model* model, double* out) {
    if (!model || !out) return fail_invalid("cuerank_cca_correlations: null argument");
    return guarded([&] {
        std::memcpy(out, model->model.correlations.data(),
                    model->model.correlations.size() * sizeof(double));
    });
}

cuerank_status cuerank_cca_project_x(const cuerank_cca_model* model, const double* v, uint32_t len,
                                     double* out) {
    if (!model || !v || !out) return fail_invalid("cuerank_cca_project_x: null argument");
    return guarded([&] {
        std::vector<double> res = project_x(model->model, std::span<const double>(v, len));
        std::memcpy(out, res.data(), res.size() * sizeof(double));
    });
}

cuerank_status cuerank_cca_project_y(const cuerank_cca_model* model, const double* v, uint32_t len,
                                     double* out) {
    if (!model || !v || !out) return fail_invalid("cuerank_cca_project_y: null argument");
    return guarded([&] {
        std::vector<double> res = project_y(model->model, std::span<const double>(v, len));
        std::memcpy(out, res.data(), res.size() * sizeof(double));
    });
}

cuerank_status cuerank_cca_similarity(const cuerank_cca_model* model, const double* x_vec,
                                      uint32_t x_len, const double* y_vec, uint32_t y_len,
                                      double* out) {
    if (!model || !x_vec || !y_vec || !out)
        return fail_invalid("cuerank_cca_similarity: null argument");
    return guarded([&] {
        *out = similarity(model->model, std::span<const double>(x_vec, x_len),
                          std::span<const double>(y_vec, y_len));
    });
}

cuerank_status cuerank_kernel_score(const double* cosines, uint32_t n, uint32_t m, double p,
                                    double* out) {
    if (!cosines || !out) return fail_invalid("cuerank_kernel_score: null argument");
    return guarded([&] {
        DenseMatrix mat(n, m);
        std::memcpy(mat.values.data(), cosines, sizeof(double) * n * m);
        *out = kernel_score(mat, p);
    });
}

cuerank_status cuerank_combination_weights(uint32_t cue_count, uint32_t preferred_index,
                                           double* out) {
    if (!out) return fail_invalid("cuerank_combination_weights: null argument");
    return guarded([&] {
        std::vector<double> w = combination_weights(cue_count, preferred_index);
        std::memcpy(out, w.data(), w.size() * sizeof(double));
    });
}

cuerank_status cuerank_combine_scores(const double* per_cue, uint32_t cue_count,
                                      const double* weights, double* out) {
    if (!per_cue || !weights || !out) return fail_invalid("cuerank_combine_scores: null argument");
    return guarded([&] {
        DenseMatrix mat(cue_count, 4);
        std::memcpy(mat.values.data(), per_cue, sizeof(double) * cue_count * 4);
        std::array<double, 4> res =
            combine_scores(mat, std::span<const double>(weights, cue_count));
        std::memcpy(out, res.data(), sizeof(res));
    });
}

cuerank_status cuerank_choose_answer(const double* combined4, uint32_t* out_index) {
    if (!combined4 || !out_index) return fail_invalid("cuerank_choose_answer: null argument");
    return guarded([&] {
        *out_index =
            static_cast<uint32_t>(choose_answer(std::span<const double>(combined4, 4)));
    });
}

cuerank_status cuerank_attach_auxiliary(const double* combined4, const double* auxiliary4,
                                        double* out) {
    if (!combined4 || !auxiliary4 || !out)
        return fail_invalid("cuerank_attach_auxiliary: null argument");
    return guarded([&] {
        std::array<double, 4> combined{}, aux{};
        std::memcpy(combined.data(), combined4, sizeof(combined));
        std::memcpy(aux.data(), auxiliary4, sizeof(aux));
        std::array<double, 4> res = attach_auxiliary(combined, aux);
        std::memcpy(out, res.data(), sizeof(res));
    });
}

cuerank_status cuerank_run_fit(const char* config_path, const cuerank_run_options* options,
                               char** out_report) {
    if (!config_path || !out_report) return fail_invalid("cuerank_run_fit: null argument");
    return guarded([&] {
        RunConfig cfg = load_run_config(config_path);
        *out_report = copy_string(cmd_fit(cfg, to_run_options(options)));
    });
}

cuerank_status cuerank_run_eval(const char* config_path, const cuerank_run_options* options,
                                char** out_table) {
    if (!config_path || !out_table) return fail_invalid("cuerank_run_eval: null argument");
    return guarded([&] {
        RunConfig cfg = load_run_config(config_path);
        *out_table = copy_string(cmd_eval(cfg, to_run_options(options)));
    });
}

cuerank_status cuerank_run_synth(const char* config_path, const cuerank_run_options* options,
                                 char** out_report) {
    if (!config_path || !out_report) return fail_invalid("cuerank_run_synth: null argument");
    return guarded([&] {
        RunConfig cfg = load_run_config(config_path);
        *out_report = copy_string(cmd_synth(cfg, to_run_options(options)));
    });
}

cuerank_status cuerank_run_select_regions(const char* config_path,
                                          const cuerank_run_options* options,
                                          const char* image_id, const char* answer_text,
                                          char** out_report) {
    if (!config_path || !image_id || !answer_text || !out_report)
        return fail_invalid("cuerank_run_select_regions: null argument");
    return guarded([&] {
        RunConfig cfg = load_run_config(config_path);
        *out_report =
            copy_string(cmd_select_regions(cfg, to_run_options(options), image_id, answer_text));
    });
}

cuerank_status cuerank_inspect_model(const char* model_path, char** out_report) {
    if (!model_path || !out_report) return fail_invalid("cuerank_inspect_model: null argument");
    return guarded([&] { *out_report = copy_string(cmd_inspect_model(model_path)); });
}

} // extern "C"
