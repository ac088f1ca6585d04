#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cuerank/eval.hpp"

namespace cuerank {

enum class DistractorMode { independent, near_miss };

DistractorMode distractor_mode_from_string(std::string_view name);
std::string to_string(DistractorMode mode);

// One generated cue kind: feature = signal * (map . latent slice) + noise.
struct SyntheticCueSpec {
    std::string name;
    std::size_t dim = 32;
    RegionRole role = RegionRole::whole;
    double signal = 1.0;                        // multiplier on signal_correlation
    std::size_t latent_begin = 0;
    std::size_t latent_end = 0;                 // 0 = full latent
};

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::size_t n_train = 400;
    std::size_t n_test = 400;
    std::vector<SyntheticCueSpec> cues;         // empty = default cue set
    std::size_t latent_dim = 8;
    double signal_correlation = 0.9;            // strictly inside (0, 1)
    double noise_scale = 1.0;
    DistractorMode distractor_mode = DistractorMode::independent;
    std::vector<QuestionType> question_types;   // empty = {Past, PersonAttribute, ObjectAttribute}
    std::size_t person_detections = 4;          // per group-a image, planted box included
    std::size_t object_detections = 4;
    std::size_t selection_pairs = 600;          // training pairs per selection model
    std::size_t embedding_dim = 300;
    double near_miss_alpha = 0.75;              // latent blend for hard distractors

    void validate() const;
};

// In-memory planted-structure dataset: every image shares a latent with its
// correct answer, cue features are noisy linear maps of that latent, and
// each phrase in a group-a answer has one matching planted detection.
struct SyntheticDataset {
    CueRegistry registry;
    FeatureStore store;
    EmbeddingTable embeddings;
    std::vector<Question> train_questions;
    std::vector<Question> test_questions;
    std::map<std::string, DetectionSet> detections;
    Vocabulary person_vocab;
    Vocabulary object_vocab;
    std::map<std::string, CueModelSpec> cue_specs;
    std::vector<ScoreConfig> score_configs;     // ensemble + one single-cue config per cue model
    std::vector<SelectionPair> person_pairs;
    std::vector<SelectionPair> object_pairs;
    std::string person_select_cue;
    std::string object_select_cue;
    // Hidden truth for planted-selection checks: question id -> detection index.
    std::map<std::string, std::uint32_t> planted_person_box;
    std::map<std::string, std::uint32_t> planted_object_box;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Writes the dataset plus a ready-to-run config (run.ini) into out_dir.
// Returns the config path.
std::string write_synthetic(const SyntheticDataset& dataset, const SyntheticSpec& spec,
                            const std::string& out_dir);

// Deterministic stream used throughout generation; SplitMix64 underneath.
class SyntheticRng {
public:
    explicit SyntheticRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next_u64();
    double uniform();                    // [0, 1)
    double normal();                     // Box-Muller, one value per call
    std::size_t uniform_index(std::size_t n); // [0, n)

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cuerank
