#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cuerank/matrix.hpp"

namespace cuerank {

// How CcaConfig::regularization is turned into the per-view ridge term.
// scaled_by_trace: lambda_v = regularization * trace(C_v) / dim_v, which keeps
// the shrinkage comparable across 11-d and 4096-d views. absolute: the value
// is added to each view's covariance diagonal as-is.
enum class RidgeMode { scaled_by_trace, absolute };

struct CcaConfig {
    double regularization = 1e-4;
    RidgeMode ridge_mode = RidgeMode::scaled_by_trace;
    std::size_t components = 0; // 0 = min(dim_x, dim_y, 300)
    double correlation_power = 4.0;
};

// Fitted two-view joint embedding. Immutable after fit; safe to share across
// concurrent readers.
struct CcaModel {
    std::vector<double> mean_x;
    std::vector<double> mean_y;
    DenseMatrix proj_x; // dim_x x k
    DenseMatrix proj_y; // dim_y x k
    std::vector<double> correlations; // k, descending, clamped to [0, 1]
    CcaConfig config;

    std::size_t dim_x() const { return mean_x.size(); }
    std::size_t dim_y() const { return mean_y.size(); }
    std::size_t components() const { return correlations.size(); }
};

// Fits a regularized CCA model: each view is whitened by the symmetric
// inverse square root of (C + lambda I), and the SVD of the whitened
// cross-covariance yields projections and canonical correlations.
// Deterministic for fixed input; column signs are fixed by forcing the
// largest-magnitude entry of each proj_x column positive.
CcaModel fit_cca(const DenseMatrix& x_samples, const DenseMatrix& y_samples,
                 const CcaConfig& config = {});

// (v - mean_x) * proj_x, coordinate j scaled by correlations[j]^correlation_power.
std::vector<double> project_x(const CcaModel& model, std::span<const double> v);
std::vector<double> project_y(const CcaModel& model, std::span<const double> v);

// Cosine of the two projected vectors; 0 if either projection has norm < 1e-12.
double similarity(const CcaModel& model, std::span<const double> x_vec,
                  std::span<const double> y_vec);

// Binary model file: magic "CCA1", then little-endian u32 dim_x, dim_y, k,
// f64 correlation_power, regularization, then f64 mean_x, mean_y,
// proj_x (row-major), proj_y (row-major), correlations.
// Save/load round-trips reproduce similarity values bitwise.
void save_cca_model(const CcaModel& model, const std::string& path);
CcaModel load_cca_model(const std::string& path);

} // namespace cuerank
