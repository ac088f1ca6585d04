#include "cuerank/cca.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace cuerank {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr double kEigFloor = 1e-12;

RowMajorMap map_matrix(const DenseMatrix& m) {
    return RowMajorMap(m.values.data(), static_cast<Eigen::Index>(m.rows),
                       static_cast<Eigen::Index>(m.cols));
}

// Symmetric inverse square root of (cov + lambda I) via eigendecomposition.
// Eigenvalues are floored at kEigFloor; with lambda == 0 a floored eigenvalue
// means the covariance is rank-deficient and the fit must not proceed.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& cov, double lambda, const char* view) {
    Eigen::MatrixXd reg = cov;
    reg.diagonal().array() += lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reg);
    if (eig.info() != Eigen::Success)
        raise(ErrorCode::internal, std::string("fit_cca: eigendecomposition failed for view ") + view);
    Eigen::VectorXd evals = eig.eigenvalues();
    const double scale = std::max(evals.cwiseAbs().maxCoeff(), 1.0);
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (lambda == 0.0 && evals(i) < kEigFloor * scale)
            raise(ErrorCode::singular_covariance,
                  std::string("fit_cca: singular covariance for view ") + view +
                      " with zero regularization");
        evals(i) = std::max(evals(i), kEigFloor);
    }
    Eigen::VectorXd inv_sqrt = evals.array().rsqrt();
    return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

double effective_lambda(const CcaConfig& cfg, const Eigen::MatrixXd& cov) {
    if (cfg.ridge_mode == RidgeMode::absolute) return cfg.regularization;
    return cfg.regularization * cov.trace() / static_cast<double>(cov.rows());
}

void check_metric_orthonormality(const Eigen::MatrixXd& proj, const Eigen::MatrixXd& cov,
                                 double lambda, const char* view) {
    Eigen::MatrixXd reg = cov;
    reg.diagonal().array() += lambda;
    Eigen::MatrixXd gram = proj.transpose() * reg * proj;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-6)
        raise(ErrorCode::internal,
              std::string("fit_cca: projection columns not orthonormal under the "
                          "regularized covariance metric for view ") + view);
}

void write_f64(std::ostream& os, const double* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void read_f64(std::istream& is, double* data, std::size_t n, const std::string& path) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) raise(ErrorCode::io, "truncated model file: " + path);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) raise(ErrorCode::io, "truncated model file: " + path);
    return v;
}

} // namespace

CcaModel fit_cca(const DenseMatrix& x_samples, const DenseMatrix& y_samples,
                 const CcaConfig& config) {
    x_samples.validate("fit_cca: x_samples");
    y_samples.validate("fit_cca: y_samples");
    const std::size_t n = x_samples.rows;
    if (n != y_samples.rows)
        raise(ErrorCode::dimension_mismatch, "fit_cca: views have different sample counts");
    if (n < 2)
        raise(ErrorCode::invalid_argument, "fit_cca: need at least 2 samples");
    const std::size_t dim_x = x_samples.cols;
    const std::size_t dim_y = y_samples.cols;
    if (dim_x == 0 || dim_y == 0)
        raise(ErrorCode::invalid_argument, "fit_cca: zero-dimensional view");
    if (config.regularization < 0.0)
        raise(ErrorCode::invalid_argument, "fit_cca: regularization must be >= 0");
    if (config.correlation_power < 0.0)
        raise(ErrorCode::invalid_argument, "fit_cca: correlation_power must be >= 0");

    std::size_t k = config.components;
    const std::size_t max_k = std::min(dim_x, dim_y);
    if (k == 0) k = std::min(max_k, static_cast<std::size_t>(300));
    if (k > max_k)
        raise(ErrorCode::invalid_argument, "fit_cca: components exceed min(dim_x, dim_y)");

    auto x = map_matrix(x_samples);
    auto y = map_matrix(y_samples);

    Eigen::RowVectorXd mean_x = x.colwise().mean();
    Eigen::RowVectorXd mean_y = y.colwise().mean();
    Eigen::MatrixXd xc = x.rowwise() - mean_x;
    Eigen::MatrixXd yc = y.rowwise() - mean_y;

    const double denom = static_cast<double>(n - 1);
    Eigen::MatrixXd cxx = (xc.transpose() * xc) / denom;
    Eigen::MatrixXd cyy = (yc.transpose() * yc) / denom;
    Eigen::MatrixXd cxy = (xc.transpose() * yc) / denom;

    const double lambda_x = effective_lambda(config, cxx);
    const double lambda_y = effective_lambda(config, cyy);

    Eigen::MatrixXd wx = inverse_sqrt(cxx, lambda_x, "x");
    Eigen::MatrixXd wy = inverse_sqrt(cyy, lambda_y, "y");

    Eigen::MatrixXd whitened = wx * cxy * wy;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(whitened, Eigen::ComputeThinU | Eigen::ComputeThinV);

    Eigen::MatrixXd proj_x = wx * svd.matrixU().leftCols(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd proj_y = wy * svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
    Eigen::VectorXd sigma = svd.singularValues().head(static_cast<Eigen::Index>(k));

    // Deterministic sign convention: largest-magnitude entry of each proj_x
    // column positive, paired proj_y column flipped in tandem.
    for (Eigen::Index j = 0; j < proj_x.cols(); ++j) {
        Eigen::Index imax = 0;
        proj_x.col(j).cwiseAbs().maxCoeff(&imax);
        if (proj_x(imax, j) < 0.0) {
            proj_x.col(j) = -proj_x.col(j);
            proj_y.col(j) = -proj_y.col(j);
        }
    }

    check_metric_orthonormality(proj_x, cxx, lambda_x, "x");
    check_metric_orthonormality(proj_y, cyy, lambda_y, "y");

    CcaModel model;
    model.mean_x.assign(mean_x.data(), mean_x.data() + dim_x);
    model.mean_y.assign(mean_y.data(), mean_y.data() + dim_y);
    model.proj_x = DenseMatrix(dim_x, k);
    model.proj_y = DenseMatrix(dim_y, k);
    for (std::size_t r = 0; r < dim_x; ++r)
        for (std::size_t c = 0; c < k; ++c)
            model.proj_x.at(r, c) = proj_x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t r = 0; r < dim_y; ++r)
        for (std::size_t c = 0; c < k; ++c)
            model.proj_y.at(r, c) = proj_y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    model.correlations.resize(k);
    for (std::size_t j = 0; j < k; ++j)
        model.correlations[j] = std::clamp(sigma(static_cast<Eigen::Index>(j)), 0.0, 1.0);
    model.config = config;
    model.config.components = k;
    return model;
}

namespace {

std::vector<double> project(std::span<const double> v, const std::vector<double>& mean,
                            const DenseMatrix& proj, const std::vector<double>& correlations,
                            double power, const char* which) {
    if (v.size() != mean.size())
        raise(ErrorCode::dimension_mismatch,
              std::string(which) + ": vector length does not match model dimension");
    const std::size_t k = proj.cols;
    std::vector<double> out(k, 0.0);
    for (std::size_t r = 0; r < proj.rows; ++r) {
        const double centered = v[r] - mean[r];
        if (centered == 0.0) continue;
        const double* row = proj.values.data() + r * k;
        for (std::size_t c = 0; c < k; ++c) out[c] += centered * row[c];
    }
    for (std::size_t c = 0; c < k; ++c) out[c] *= std::pow(correlations[c], power);
    return out;
}

} // namespace

std::vector<double> project_x(const CcaModel& model, std::span<const double> v) {
    return project(v, model.mean_x, model.proj_x, model.correlations,
                   model.config.correlation_power, "project_x");
}

std::vector<double> project_y(const CcaModel& model, std::span<const double> v) {
    return project(v, model.mean_y, model.proj_y, model.correlations,
                   model.config.correlation_power, "project_y");
}

double similarity(const CcaModel& model, std::span<const double> x_vec,
                  std::span<const double> y_vec) {
    std::vector<double> px = project_x(model, x_vec);
    std::vector<double> py = project_y(model, y_vec);
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        dot += px[i] * py[i];
        nx += px[i] * px[i];
        ny += py[i] * py[i];
    }
    nx = std::sqrt(nx);
    ny = std::sqrt(ny);
    if (nx < 1e-12 || ny < 1e-12) return 0.0;
    return std::clamp(dot / (nx * ny), -1.0, 1.0);
}

void save_cca_model(const CcaModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) raise(ErrorCode::io, "cannot open model file for writing: " + path);
    os.write("CCA1", 4);
    write_u32(os, static_cast<std::uint32_t>(model.dim_x()));
    write_u32(os, static_cast<std::uint32_t>(model.dim_y()));
    write_u32(os, static_cast<std::uint32_t>(model.components()));
    write_f64(os, &model.config.correlation_power, 1);
    write_f64(os, &model.config.regularization, 1);
    write_f64(os, model.mean_x.data(), model.mean_x.size());
    write_f64(os, model.mean_y.data(), model.mean_y.size());
    write_f64(os, model.proj_x.values.data(), model.proj_x.values.size());
    write_f64(os, model.proj_y.values.data(), model.proj_y.values.size());
    write_f64(os, model.correlations.data(), model.correlations.size());
    if (!os) raise(ErrorCode::io, "failed writing model file: " + path);
}

CcaModel load_cca_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(ErrorCode::io, "cannot open model file: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CCA1", 4) != 0)
        raise(ErrorCode::parse, "not a CCA model file (bad magic): " + path);
    const std::uint32_t dim_x = read_u32(is, path);
    const std::uint32_t dim_y = read_u32(is, path);
    const std::uint32_t k = read_u32(is, path);
    if (dim_x == 0 || dim_y == 0 || k == 0 || k > std::min(dim_x, dim_y))
        raise(ErrorCode::parse, "corrupt model header: " + path);

    CcaModel model;
    read_f64(is, &model.config.correlation_power, 1, path);
    read_f64(is, &model.config.regularization, 1, path);
    model.config.components = k;
    model.mean_x.resize(dim_x);
    model.mean_y.resize(dim_y);
    model.proj_x = DenseMatrix(dim_x, k);
    model.proj_y = DenseMatrix(dim_y, k);
    model.correlations.resize(k);
    read_f64(is, model.mean_x.data(), dim_x, path);
    read_f64(is, model.mean_y.data(), dim_y, path);
    read_f64(is, model.proj_x.values.data(), model.proj_x.values.size(), path);
    read_f64(is, model.proj_y.values.data(), model.proj_y.values.size(), path);
    read_f64(is, model.correlations.data(), k, path);
    is.peek();
    if (!is.eof()) raise(ErrorCode::parse, "trailing bytes in model file: " + path);
    return model;
}

} // namespace cuerank
