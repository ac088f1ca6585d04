#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cuerank/cuerank.h"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct ModelGuard {
    cuerank_cca_model* model = nullptr;
    ~ModelGuard() { cuerank_cca_free(model); }
};

struct StringGuard {
    char* s = nullptr;
    ~StringGuard() { cuerank_string_free(s); }
};

// Two coupled views, row-major.
void sample_views(oracle::Rng& rng, uint32_t n, uint32_t dx, uint32_t dy, std::vector<double>& x,
                  std::vector<double>& y) {
    x.assign(n * dx, 0.0);
    y.assign(n * dy, 0.0);
    for (uint32_t i = 0; i < n; ++i) {
        const double z = rng.normal();
        for (uint32_t j = 0; j < dx; ++j) x[i * dx + j] = (j == 0 ? 0.8 * z : 0.0) + rng.normal();
        for (uint32_t j = 0; j < dy; ++j) y[i * dy + j] = (j == 0 ? z : 0.0) + rng.normal();
    }
}

} // namespace

TEST_CASE("version and error strings") {
    CHECK(std::string(cuerank_version()).find("cuerank") != std::string::npos);
    CHECK(cuerank_last_error() != nullptr);
}

TEST_CASE("cca lifecycle through the C surface") {
    oracle::Rng rng(61);
    std::vector<double> x, y;
    sample_views(rng, 50, 3, 2, x, y);

    ModelGuard m;
    REQUIRE(cuerank_cca_fit(x.data(), y.data(), 50, 3, 2, 1e-4, 1, 0, 4.0, &m.model) ==
            CUERANK_OK);
    CHECK(cuerank_cca_dim_x(m.model) == 3);
    CHECK(cuerank_cca_dim_y(m.model) == 2);
    const uint32_t k = cuerank_cca_components(m.model);
    CHECK(k == 2);

    std::vector<double> correlations(k);
    REQUIRE(cuerank_cca_correlations(m.model, correlations.data()) == CUERANK_OK);
    CHECK(correlations[0] >= correlations[1]);
    CHECK(correlations[0] <= 1.0 + 1e-6);

    std::vector<double> vx = {0.5, -0.2, 1.0};
    std::vector<double> vy = {0.1, 0.3};
    std::vector<double> px(k), py(k);
    REQUIRE(cuerank_cca_project_x(m.model, vx.data(), 3, px.data()) == CUERANK_OK);
    REQUIRE(cuerank_cca_project_y(m.model, vy.data(), 2, py.data()) == CUERANK_OK);

    double sim = 0.0;
    REQUIRE(cuerank_cca_similarity(m.model, vx.data(), 3, vy.data(), 2, &sim) == CUERANK_OK);
    double dot = 0, nx = 0, ny = 0;
    for (uint32_t j = 0; j < k; ++j) {
        dot += px[j] * py[j];
        nx += px[j] * px[j];
        ny += py[j] * py[j];
    }
    CHECK(sim == doctest::Approx(dot / std::sqrt(nx * ny)).epsilon(1e-12));

    SUBCASE("save and load preserve similarity bitwise") {
        const std::string path = (fs::temp_directory_path() / "cuerank_capi.cca").string();
        REQUIRE(cuerank_cca_save(m.model, path.c_str()) == CUERANK_OK);
        ModelGuard loaded;
        REQUIRE(cuerank_cca_load(path.c_str(), &loaded.model) == CUERANK_OK);
        double sim2 = 0.0;
        REQUIRE(cuerank_cca_similarity(loaded.model, vx.data(), 3, vy.data(), 2, &sim2) ==
                CUERANK_OK);
        CHECK(sim == sim2);
        fs::remove(path);
    }
    SUBCASE("dimension mismatch surfaces through the status code") {
        CHECK(cuerank_cca_project_x(m.model, vy.data(), 2, px.data()) ==
              CUERANK_ERR_DIMENSION_MISMATCH);
        CHECK(std::string(cuerank_last_error()).find("dimension") != std::string::npos);
    }
}

TEST_CASE("error statuses map to error kinds") {
    SUBCASE("null arguments") {
        CHECK(cuerank_cca_load(nullptr, nullptr) == CUERANK_ERR_INVALID_ARGUMENT);
        CHECK(cuerank_kernel_score(nullptr, 1, 1, 5.0, nullptr) ==
              CUERANK_ERR_INVALID_ARGUMENT);
    }
    SUBCASE("missing file is an io error") {
        ModelGuard m;
        CHECK(cuerank_cca_load("/nonexistent/model.cca", &m.model) == CUERANK_ERR_IO);
        CHECK(std::strlen(cuerank_last_error()) > 0);
    }
    SUBCASE("singular covariance with zero ridge") {
        // Second x column duplicates the first.
        std::vector<double> x(20 * 2), y(20 * 2);
        oracle::Rng rng(5);
        for (int i = 0; i < 20; ++i) {
            x[static_cast<std::size_t>(i) * 2] = rng.normal();
            x[static_cast<std::size_t>(i) * 2 + 1] = x[static_cast<std::size_t>(i) * 2];
            y[static_cast<std::size_t>(i) * 2] = rng.normal();
            y[static_cast<std::size_t>(i) * 2 + 1] = rng.normal();
        }
        ModelGuard m;
        CHECK(cuerank_cca_fit(x.data(), y.data(), 20, 2, 2, 0.0, 0, 0, 4.0, &m.model) ==
              CUERANK_ERR_SINGULAR_COVARIANCE);
    }
    SUBCASE("a success clears the error message") {
        ModelGuard m;
        (void)cuerank_cca_load("/nonexistent/model.cca", &m.model);
        CHECK(std::strlen(cuerank_last_error()) > 0);
        double out[4];
        const double scores[4] = {0.1, 0.2, 0.3, 0.4};
        REQUIRE(cuerank_attach_auxiliary(scores, scores, out) == CUERANK_OK);
        CHECK(std::strlen(cuerank_last_error()) == 0);
    }
}

TEST_CASE("score combination primitives through the C surface") {
    SUBCASE("kernel score") {
        const double cosines[2] = {1.0, 0.0};
        double out = 0;
        REQUIRE(cuerank_kernel_score(cosines, 2, 1, 5.0, &out) == CUERANK_OK);
        CHECK(out == doctest::Approx(0.5));
    }
    SUBCASE("weights") {
        double w[4];
        REQUIRE(cuerank_combination_weights(4, 0, w) == CUERANK_OK);
        CHECK(w[0] == doctest::Approx(0.7));
        CHECK(w[3] == 0.1);
        CHECK(cuerank_combination_weights(11, 0, w) == CUERANK_ERR_CONFIG);
    }
    SUBCASE("combine and choose") {
        const double per_cue[8] = {1, 0, 0, 0, 0, 1, 0, 0};
        const double w[2] = {0.9, 0.1};
        double combined[4];
        REQUIRE(cuerank_combine_scores(per_cue, 2, w, combined) == CUERANK_OK);
        CHECK(combined[0] == doctest::Approx(0.9));
        CHECK(combined[1] == doctest::Approx(0.1));
        uint32_t idx = 99;
        REQUIRE(cuerank_choose_answer(combined, &idx) == CUERANK_OK);
        CHECK(idx == 0);
    }
}

TEST_CASE("pipeline commands through the C surface") {
    const fs::path dir = fs::temp_directory_path() / "cuerank_capi_ws";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream os((dir / "boot.ini").string());
        os << "[synth]\nseed = 44\nn_train = 60\nn_test = 30\nout_dir = out\n";
    }

    cuerank_run_options opt{};
    opt.seed = -1;
    opt.threads = 2;

    StringGuard synth_report;
    REQUIRE(cuerank_run_synth((dir / "boot.ini").string().c_str(), &opt, &synth_report.s) ==
            CUERANK_OK);
    CHECK(std::string(synth_report.s).find("synthetic dataset written") != std::string::npos);

    const std::string run_ini = (dir / "out" / "run.ini").string();
    StringGuard fit_report;
    REQUIRE(cuerank_run_fit(run_ini.c_str(), &opt, &fit_report.s) == CUERANK_OK);
    CHECK(std::string(fit_report.s).find("fitted") != std::string::npos);

    StringGuard table;
    opt.csv = 1;
    REQUIRE(cuerank_run_eval(run_ini.c_str(), &opt, &table.s) == CUERANK_OK);
    CHECK(std::string(table.s).find("ensemble_accuracy") != std::string::npos);

    StringGuard inspect;
    const std::string model_path = (dir / "out" / "models" / "person_select.cca").string();
    REQUIRE(cuerank_inspect_model(model_path.c_str(), &inspect.s) == CUERANK_OK);
    CHECK(std::string(inspect.s).find("top correlations") != std::string::npos);

    SUBCASE("select-regions") {
        // First group-a test image from the generated questions.
        std::ifstream is((dir / "out" / "questions_test.tsv").string());
        std::string line, image;
        while (std::getline(is, line)) {
            if (line.find("\tPast\t") != std::string::npos) {
                image = line.substr(0, line.find('#'));
                break;
            }
        }
        REQUIRE(!image.empty());
        StringGuard sel;
        REQUIRE(cuerank_run_select_regions(run_ini.c_str(), &opt, image.c_str(),
                                           "the girl and the dog", &sel.s) == CUERANK_OK);
        CHECK(std::string(sel.s).find("person phrase 'girl'") != std::string::npos);
        CHECK(std::string(sel.s).find("object phrase 'dog'") != std::string::npos);

        StringGuard bad;
        CHECK(cuerank_run_select_regions(run_ini.c_str(), &opt, "missing", "x", &bad.s) ==
              CUERANK_ERR_MISSING_DATA);
    }
    SUBCASE("missing config file maps to io") {
        StringGuard out;
        CHECK(cuerank_run_eval("/nonexistent.ini", &opt, &out.s) == CUERANK_ERR_IO);
    }
    fs::remove_all(dir);
}
