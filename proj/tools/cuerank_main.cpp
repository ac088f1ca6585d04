// Command-line front end; talks to the cuerank shared library through its
// C API only.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cuerank/cuerank.h"

namespace {

struct GlobalFlags {
    std::string config_path;
    long long seed = -1;
    int threads = -1; // -1: use the config value; 0: all cores
    std::string format = "text";
};

cuerank_run_options make_options(const GlobalFlags& flags, const char* json_scores) {
    cuerank_run_options opt{};
    opt.seed = flags.seed;
    opt.threads = flags.threads;
    opt.csv = flags.format == "csv" ? 1 : 0;
    opt.json_scores_path = json_scores;
    return opt;
}

int finish(cuerank_status status, char* report) {
    if (status != CUERANK_OK) {
        std::fprintf(stderr, "error: %s\n", cuerank_last_error());
        cuerank_string_free(report);
        return 1;
    }
    if (report) {
        std::fputs(report, stdout);
        cuerank_string_free(report);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-cue CCA ranking for multiple-choice visual questions"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "run configuration file");
    app.add_option("--seed", flags.seed, "override the configured seed");
    app.add_option("--threads", flags.threads, "worker threads (0 = all cores)");
    app.add_option("--format", flags.format, "table output format")
        ->check(CLI::IsMember({"text", "csv"}));

    CLI::App* fit = app.add_subcommand("fit", "fit CCA models from training data");
    CLI::App* eval = app.add_subcommand("eval", "evaluate questions into an accuracy table");
    std::string json_scores;
    eval->add_option("--json-scores", json_scores, "dump per-question per-cue scores to a file");
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    CLI::App* select = app.add_subcommand("select-regions",
                                          "show phrase chunks and selected boxes for one answer");
    std::string image_id, answer_text;
    select->add_option("--image", image_id, "image id")->required();
    select->add_option("--answer", answer_text, "answer text")->required();
    CLI::App* inspect = app.add_subcommand("inspect-model", "print a model file summary");
    std::string model_path;
    inspect->add_option("model", model_path, "model file path")->required();

    CLI11_PARSE(app, argc, argv);

    auto need_config = [&flags]() {
        if (flags.config_path.empty()) {
            std::fprintf(stderr, "error: --config PATH is required for this command\n");
            return false;
        }
        return true;
    };

    char* report = nullptr;
    cuerank_status status = CUERANK_ERR_INVALID_ARGUMENT;
    if (fit->parsed()) {
        if (!need_config()) return 1;
        cuerank_run_options opt = make_options(flags, nullptr);
        status = cuerank_run_fit(flags.config_path.c_str(), &opt, &report);
    } else if (eval->parsed()) {
        if (!need_config()) return 1;
        cuerank_run_options opt =
            make_options(flags, json_scores.empty() ? nullptr : json_scores.c_str());
        status = cuerank_run_eval(flags.config_path.c_str(), &opt, &report);
    } else if (synth->parsed()) {
        if (!need_config()) return 1;
        cuerank_run_options opt = make_options(flags, nullptr);
        status = cuerank_run_synth(flags.config_path.c_str(), &opt, &report);
    } else if (select->parsed()) {
        if (!need_config()) return 1;
        cuerank_run_options opt = make_options(flags, nullptr);
        status = cuerank_run_select_regions(flags.config_path.c_str(), &opt, image_id.c_str(),
                                            answer_text.c_str(), &report);
    } else if (inspect->parsed()) {
        status = cuerank_inspect_model(model_path.c_str(), &report);
    }
    return finish(status, report);
}
