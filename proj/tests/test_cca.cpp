#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cuerank/cca.hpp"
#include "oracles.hpp"

using namespace cuerank;

namespace {

DenseMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    DenseMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
    return m;
}

DenseMatrix random_matrix(oracle::Rng& rng, std::size_t n, std::size_t d) {
    DenseMatrix m(n, d);
    for (double& v : m.values) v = rng.normal();
    return m;
}

CcaConfig zero_reg_config(std::size_t components = 0) {
    CcaConfig cfg;
    cfg.regularization = 0.0;
    cfg.ridge_mode = RidgeMode::absolute;
    cfg.components = components;
    return cfg;
}

// Correlated pair: each row shares one latent at the given strength in the
// first coordinate, all other coordinates independent noise.
void correlated_pair(oracle::Rng& rng, std::size_t n, std::size_t dx, std::size_t dy, double rho,
                     DenseMatrix& x, DenseMatrix& y) {
    x = DenseMatrix(n, dx);
    y = DenseMatrix(n, dy);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = rng.normal();
        x.at(i, 0) = rho * z + std::sqrt(1.0 - rho * rho) * rng.normal();
        y.at(i, 0) = z;
        for (std::size_t j = 1; j < dx; ++j) x.at(i, j) = rng.normal();
        for (std::size_t j = 1; j < dy; ++j) y.at(i, j) = rng.normal();
    }
}

} // namespace

TEST_CASE("one-dimensional perfectly correlated views") {
    oracle::Rng rng(7);
    std::vector<std::vector<double>> xr, yr, yneg;
    for (int i = 0; i < 40; ++i) {
        const double v = rng.normal();
        xr.push_back({v});
        yr.push_back({v});
        yneg.push_back({-v});
    }
    CcaModel model = fit_cca(from_rows(xr), from_rows(yr), zero_reg_config());
    REQUIRE(model.components() == 1);
    CHECK(model.correlations[0] == doctest::Approx(1.0).epsilon(1e-10));

    CcaModel flipped = fit_cca(from_rows(xr), from_rows(yneg), zero_reg_config());
    CHECK(flipped.correlations[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("one-dimensional correlation equals |Pearson| within 1e-10") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        oracle::Rng rng(seed);
        const std::size_t n = 30 + static_cast<std::size_t>(rng.uniform() * 50);
        std::vector<double> xs(n), ys(n);
        std::vector<std::vector<double>> xr(n), yr(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = rng.normal();
            ys[i] = 0.6 * xs[i] + rng.normal();
            xr[i] = {xs[i]};
            yr[i] = {ys[i]};
        }
        CcaModel model = fit_cca(from_rows(xr), from_rows(yr), zero_reg_config());
        const double expected = std::fabs(oracle::pearson(xs, ys));
        CHECK(std::fabs(model.correlations[0] - expected) < 1e-10);
    }
}

TEST_CASE("planted two-dimensional latent matches the brute-force oracle") {
    oracle::Rng rng(2024);
    DenseMatrix x, y;
    correlated_pair(rng, 50, 2, 2, 0.8, x, y);
    CcaModel model = fit_cca(x, y, zero_reg_config());
    const double brute =
        oracle::brute_force_top_correlation(x.values, y.values, 50, 2, 2, 30, 99);
    CHECK(std::fabs(model.correlations[0] - brute) < 0.1);
    // The solver and the direct maximizer agree far more tightly in practice.
    CHECK(std::fabs(model.correlations[0] - brute) < 1e-4);
}

TEST_CASE("projection semantics") {
    CcaModel model;
    model.mean_x = {0.0, 0.0};
    model.mean_y = {0.0, 0.0};
    model.proj_x = from_rows({{1.0}, {0.0}});
    model.proj_y = from_rows({{1.0}, {0.0}});
    model.correlations = {0.5};
    model.config.correlation_power = 1.0;
    model.config.components = 1;

    SUBCASE("hand-computed scaling") {
        auto p = project_x(model, std::vector<double>{2.0, 7.0});
        REQUIRE(p.size() == 1);
        CHECK(p[0] == doctest::Approx(1.0)); // 2 * 1 * 0.5
    }
    SUBCASE("mean maps to zero") {
        model.mean_x = {3.0, -1.0};
        auto p = project_x(model, std::vector<double>{3.0, -1.0});
        CHECK(p[0] == 0.0);
    }
    SUBCASE("power zero leaves the centered projection unscaled") {
        model.config.correlation_power = 0.0;
        auto p = project_x(model, std::vector<double>{2.0, 7.0});
        CHECK(p[0] == doctest::Approx(2.0));
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS((void)project_x(model, std::vector<double>{1.0}), Error);
    }
}

TEST_CASE("project_y mirrors project_x on a symmetric fit") {
    oracle::Rng rng(5);
    DenseMatrix x = random_matrix(rng, 40, 3);
    CcaModel model = fit_cca(x, x, zero_reg_config());
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> v = {rng.normal(), rng.normal(), rng.normal()};
        auto px = project_x(model, v);
        auto py = project_y(model, v);
        REQUIRE(px.size() == py.size());
        for (std::size_t j = 0; j < px.size(); ++j)
            CHECK(px[j] == doctest::Approx(py[j]).epsilon(1e-6));
    }
}

TEST_CASE("similarity is the cosine of the projections") {
    CcaModel model;
    model.mean_x = {0, 0, 0};
    model.mean_y = {0, 0, 0};
    model.proj_x = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    model.proj_y = model.proj_x;
    model.correlations = {1.0, 1.0, 1.0};
    model.config.correlation_power = 0.0;
    model.config.components = 3;

    std::vector<double> x{1.0, 2.0, 3.0};
    SUBCASE("parallel projections give 1") {
        CHECK(similarity(model, x, x) == doctest::Approx(1.0));
    }
    SUBCASE("orthogonal projections give 0") {
        CHECK(similarity(model, std::vector<double>{1, 0, 0}, std::vector<double>{0, 1, 0}) ==
              doctest::Approx(0.0));
    }
    SUBCASE("fixed case against direct dot/norm arithmetic") {
        std::vector<double> y{4.0, 5.0, 6.0};
        double dot = 0, nx = 0, ny = 0;
        for (int i = 0; i < 3; ++i) {
            dot += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
            nx += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
            ny += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        }
        CHECK(similarity(model, x, y) ==
              doctest::Approx(dot / std::sqrt(nx * ny)).epsilon(1e-12));
    }
    SUBCASE("near-zero projections give 0") {
        CHECK(similarity(model, std::vector<double>{0, 0, 0}, x) == 0.0);
    }
}

TEST_CASE("canonical correlations are invariant to invertible linear maps") {
    oracle::Rng rng(11);
    DenseMatrix x = random_matrix(rng, 80, 3);
    DenseMatrix y = random_matrix(rng, 80, 2);
    // Couple them slightly so correlations are not all tiny.
    for (std::size_t i = 0; i < 80; ++i) y.at(i, 0) += 0.5 * x.at(i, 0);

    CcaModel base = fit_cca(x, y, zero_reg_config());

    // Well-conditioned random transform of the X view.
    double a[3][3];
    for (auto& row : a)
        for (double& v : row) v = rng.normal() * 0.3;
    for (int i = 0; i < 3; ++i) a[i][i] += 1.5;
    DenseMatrix xt(80, 3);
    for (std::size_t i = 0; i < 80; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += x.at(i, static_cast<std::size_t>(k)) * a[k][j];
            xt.at(i, static_cast<std::size_t>(j)) = acc;
        }
    CcaModel transformed = fit_cca(xt, y, zero_reg_config());
    REQUIRE(base.components() == transformed.components());
    for (std::size_t j = 0; j < base.components(); ++j)
        CHECK(std::fabs(base.correlations[j] - transformed.correlations[j]) < 1e-6);
}

TEST_CASE("fit honors model invariants on random data") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        oracle::Rng rng(seed);
        const std::size_t n = 60;
        DenseMatrix x = random_matrix(rng, n, 4);
        DenseMatrix y = random_matrix(rng, n, 3);
        CcaModel model = fit_cca(x, y); // default scaled ridge

        REQUIRE(model.components() == 3);
        for (std::size_t j = 0; j < model.components(); ++j) {
            CHECK(model.correlations[j] <= 1.0 + 1e-6);
            CHECK(model.correlations[j] >= 0.0);
            if (j > 0) CHECK(model.correlations[j] <= model.correlations[j - 1] + 1e-12);
        }

        // Metric orthonormality, recomputed here from the samples.
        const std::size_t dx = 4;
        std::vector<double> mean(dx, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dx; ++j) mean[j] += x.at(i, j);
        for (double& v : mean) v /= static_cast<double>(n);
        std::vector<double> cov(dx * dx, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < dx; ++r)
                for (std::size_t c = 0; c < dx; ++c)
                    cov[r * dx + c] += (x.at(i, r) - mean[r]) * (x.at(i, c) - mean[c]);
        for (double& v : cov) v /= static_cast<double>(n - 1);
        double trace = 0;
        for (std::size_t j = 0; j < dx; ++j) trace += cov[j * dx + j];
        const double lambda = 1e-4 * trace / static_cast<double>(dx);
        for (std::size_t j = 0; j < dx; ++j) cov[j * dx + j] += lambda;

        const std::size_t k = model.components();
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t q = 0; q < k; ++q) {
                double acc = 0;
                for (std::size_t r = 0; r < dx; ++r)
                    for (std::size_t c = 0; c < dx; ++c)
                        acc += model.proj_x.at(r, p) * cov[r * dx + c] * model.proj_x.at(c, q);
                CHECK(std::fabs(acc - (p == q ? 1.0 : 0.0)) < 1e-6);
            }

        // Sign convention: largest-magnitude entry of each proj_x column positive.
        for (std::size_t j = 0; j < k; ++j) {
            double best = 0;
            for (std::size_t r = 0; r < dx; ++r)
                if (std::fabs(model.proj_x.at(r, j)) > std::fabs(best))
                    best = model.proj_x.at(r, j);
            CHECK(best > 0.0);
        }
    }
}

TEST_CASE("fit is deterministic") {
    oracle::Rng rng(42);
    DenseMatrix x = random_matrix(rng, 50, 4);
    DenseMatrix y = random_matrix(rng, 50, 3);
    CcaModel a = fit_cca(x, y);
    CcaModel b = fit_cca(x, y);
    CHECK(a.proj_x.values == b.proj_x.values);
    CHECK(a.proj_y.values == b.proj_y.values);
    CHECK(a.correlations == b.correlations);
    CHECK(a.mean_x == b.mean_x);

    std::vector<double> vx{0.3, -0.7, 1.1, 0.2};
    std::vector<double> vy{0.9, 0.4, -0.5};
    CHECK(similarity(a, vx, vy) == similarity(b, vx, vy));
}

TEST_CASE("fit error paths") {
    oracle::Rng rng(3);
    DenseMatrix x = random_matrix(rng, 20, 2);
    DenseMatrix y = random_matrix(rng, 20, 2);

    SUBCASE("sample count mismatch") {
        DenseMatrix y_short = random_matrix(rng, 19, 2);
        CHECK_THROWS_AS((void)fit_cca(x, y_short), Error);
    }
    SUBCASE("too few samples") {
        DenseMatrix x1(1, 2), y1(1, 2);
        CHECK_THROWS_AS((void)fit_cca(x1, y1), Error);
    }
    SUBCASE("components beyond min dimension") {
        CHECK_THROWS_AS((void)fit_cca(x, y, zero_reg_config(3)), Error);
    }
    SUBCASE("zero regularization with rank-deficient covariance") {
        DenseMatrix xdup(20, 2);
        for (std::size_t i = 0; i < 20; ++i) {
            xdup.at(i, 0) = x.at(i, 0);
            xdup.at(i, 1) = 2.0 * x.at(i, 0); // duplicated direction
        }
        try {
            (void)fit_cca(xdup, y, zero_reg_config());
            FAIL("expected singular covariance error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::singular_covariance);
        }
        // The default scaled ridge handles the same data.
        CHECK_NOTHROW((void)fit_cca(xdup, y));
    }
    SUBCASE("non-finite input") {
        x.at(0, 0) = std::nan("");
        CHECK_THROWS_AS((void)fit_cca(x, y), Error);
    }
}

TEST_CASE("model serialization round-trips bitwise") {
    oracle::Rng rng(77);
    DenseMatrix x = random_matrix(rng, 60, 5);
    DenseMatrix y = random_matrix(rng, 60, 3);
    for (std::size_t i = 0; i < 60; ++i) y.at(i, 1) += 0.4 * x.at(i, 2);
    CcaModel model = fit_cca(x, y);

    const std::string path =
        (std::filesystem::temp_directory_path() / "cuerank_test_model.cca").string();
    save_cca_model(model, path);
    CcaModel loaded = load_cca_model(path);

    CHECK(loaded.mean_x == model.mean_x);
    CHECK(loaded.mean_y == model.mean_y);
    CHECK(loaded.proj_x.values == model.proj_x.values);
    CHECK(loaded.proj_y.values == model.proj_y.values);
    CHECK(loaded.correlations == model.correlations);
    CHECK(loaded.config.correlation_power == model.config.correlation_power);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> vx(5), vy(3);
        for (double& v : vx) v = rng.normal();
        for (double& v : vy) v = rng.normal();
        const double a = similarity(model, vx, vy);
        const double b = similarity(loaded, vx, vy);
        CHECK(a == b); // bitwise
    }
    std::filesystem::remove(path);

    SUBCASE("bad magic is rejected") {
        const std::string bad =
            (std::filesystem::temp_directory_path() / "cuerank_bad_model.cca").string();
        std::FILE* f = std::fopen(bad.c_str(), "wb");
        std::fwrite("NOPE", 1, 4, f);
        std::fclose(f);
        CHECK_THROWS_AS((void)load_cca_model(bad), Error);
        std::filesystem::remove(bad);
    }
}
