#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cuerank/cca.hpp"
#include "cuerank/eval.hpp"
#include "cuerank/synthetic.hpp"

namespace cuerank {

// Parsed run configuration; every relative path is resolved against the
// directory containing the config file.
struct RunConfig {
    std::string base_dir;

    std::map<std::string, std::string> feature_files; // cue kind -> path
    std::string embeddings_path;
    std::string questions_train_path;
    std::string questions_test_path;
    std::string detections_path;
    std::string person_vocab_path;
    std::string object_vocab_path;
    std::string model_dir = "models";

    std::vector<std::pair<std::string, std::size_t>> extra_cues;
    std::map<std::string, CueModelSpec> cue_specs;  // empty = built-in defaults
    std::vector<ScoreConfig> score_configs;         // empty = built-in default ensemble

    CcaConfig cca_default;
    std::map<std::string, CcaConfig> cca_overrides; // per cue-model name

    std::string person_pairs_features, person_pairs_phrases;
    std::string object_pairs_features, object_pairs_phrases;
    std::string person_select_cue = "attr_labels";
    std::string object_select_cue = "vgg_fc7";

    double person_conf_threshold = 0.8;
    double person_min_side = 50.0;
    std::size_t object_max_candidates = 200;
    double kernel_p = 5.0;
    int threads = 1;

    std::optional<SyntheticSpec> synth;
    std::string synth_out_dir;
};

RunConfig load_run_config(const std::string& path);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    TableFormat format = TableFormat::text;
    std::optional<std::string> json_scores_path;
};

// Fits the selection models and one CCA model per (question type, cue model)
// pair, writes them under model_dir, and returns the fit report.
std::string cmd_fit(const RunConfig& config, const RunOptions& options);

// Evaluates the test questions and returns the rendered accuracy table.
std::string cmd_eval(const RunConfig& config, const RunOptions& options);

// Generates the synthetic dataset described by [synth] and returns a report.
std::string cmd_synth(const RunConfig& config, const RunOptions& options);

// Prints extracted phrase chunks and the regions selected for one answer.
std::string cmd_select_regions(const RunConfig& config, const RunOptions& options,
                               const std::string& image_id, const std::string& answer_text);

// Model file summary: dimensions, components, config, top correlations.
std::string cmd_inspect_model(const std::string& model_path);

} // namespace cuerank
