#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cuerank/cca.hpp"
#include "cuerank/ensemble.hpp"
#include "cuerank/features.hpp"
#include "cuerank/regions.hpp"
#include "cuerank/text.hpp"

namespace cuerank {

enum class QuestionType {
    Scene,
    Emotion,
    Interesting,
    Past,
    Future,
    PersonAttribute,
    PersonAction,
    PersonLocation,
    PersonObjectRelation,
    ObjectAttribute,
    ObjectAffordance,
    ObjectLocation,
};

inline constexpr std::size_t kQuestionTypeCount = 12;

// Table groups: a) whole-image, b) person box, c) object box.
enum class QuestionGroup { whole_image, person, object };

enum class Difficulty { easy, hard };

QuestionGroup group_of(QuestionType type);
std::string to_string(QuestionType type);
std::string to_string(Difficulty difficulty);
std::string to_string(QuestionGroup group); // "a", "b", "c"
QuestionType question_type_from_string(std::string_view name);
Difficulty difficulty_from_string(std::string_view name);

struct Question {
    std::string id; // "<image_id>" or "<image_id>#<suffix>"
    QuestionType qtype = QuestionType::Scene;
    Difficulty difficulty = Difficulty::easy;
    std::string prompt;
    std::array<std::string, 4> choices;
    int correct = 0; // 0..3
    std::optional<BoundingBox> focus_box; // present iff qtype is group b or c

    std::string image_id() const; // id up to the first '#'
    void validate() const;
};

// Tab-separated, one question per line:
//   id qtype difficulty prompt choice1..choice4 correct [x,y,w,h]
std::vector<Question> load_questions(const std::string& path);
void write_questions(const std::string& path, const std::vector<Question>& questions);

struct AccuracyCell {
    std::size_t correct = 0;
    std::size_t total = 0;   // answered questions (skipped excluded)
    std::size_t skipped = 0; // missing-feature questions, counted separately
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct AccuracyTable {
    // (qtype, difficulty, config name) -> cell
    std::map<std::tuple<int, int, std::string>, AccuracyCell> cells;
    std::vector<std::string> config_order;

    AccuracyCell& cell(QuestionType t, Difficulty d, const std::string& config);
    const AccuracyCell* find(QuestionType t, Difficulty d, const std::string& config) const;
    // Summed over all rows of one configuration.
    AccuracyCell overall(const std::string& config) const;
};

enum class TableFormat { text, csv };
std::string render_table(const AccuracyTable& table, TableFormat format);

// One stacked visual representation: named list of (region role, cue kind)
// parts concatenated in order.
enum class RegionRole { whole, person, object };
struct CuePart {
    RegionRole role = RegionRole::whole;
    std::string cue_kind;
};
struct CueModelSpec {
    std::string name;
    std::vector<CuePart> parts;
    std::size_t stacked_dim(const CueRegistry& registry) const;
};

// A named score configuration: per-question-type ensembles rendered as one
// column of the accuracy table.
struct ScoreConfig {
    std::string name;
    std::map<QuestionType, EnsembleConfig> per_type;
    bool zscore = false; // standardize each cue's 4 scores before weighting
};

// The spec'd cue-model and per-type roster defaults over the standard cue
// kinds (full-image places stack, person/object VGG stacks, the
// HICO+MPII+Attr label stack, and the color stack).
std::map<std::string, CueModelSpec> default_cue_specs();
std::vector<ScoreConfig> default_score_configs();

// Models are trained per (question type, cue model); this is their map key
// and model file stem, "<qtype>__<cue>".
std::string cue_model_key(QuestionType type, const std::string& cue_name);

// Everything evaluation needs, borrowed immutably.
struct EvalContext {
    const CueRegistry* registry = nullptr;
    const FeatureStore* store = nullptr;
    const EmbeddingTable* embeddings = nullptr;
    const std::map<std::string, CcaModel>* cue_models = nullptr; // key: cue_model_key()
    const CcaModel* person_select = nullptr;
    const CcaModel* object_select = nullptr;
    std::string person_select_cue = "attr_labels";
    std::string object_select_cue = "vgg_fc7";
    const std::map<std::string, DetectionSet>* detections = nullptr;
    const Vocabulary* person_vocab = nullptr;
    const Vocabulary* object_vocab = nullptr;
    const std::map<std::string, CueModelSpec>* cue_specs = nullptr;
    double person_conf_threshold = 0.8;
    double person_min_side = 50.0;
    std::size_t object_max_candidates = 200;
    double kernel_p = 5.0;
    int threads = 1;
};

// Resolves cue-part regions for one (question, answer) pair and stacks the
// parts. Group b/c questions use the gt-box records; group a questions run
// person/object box selection driven by the answer's phrase chunks. Shared
// between training-matrix assembly and evaluation.
class FeatureAssembler {
public:
    explicit FeatureAssembler(const EvalContext& ctx) : ctx_(ctx) {}

    struct AnswerView {
        std::vector<std::string> tokens;
        EmbedResult embedding;
        std::vector<PhraseChunk> chunks;
    };
    AnswerView make_answer_view(const std::string& answer_text) const;

    // Stacked visual vector for the cue spec, or nullopt with a reason when a
    // required feature record is absent.
    std::optional<std::vector<double>> assemble(const Question& q, const CueModelSpec& spec,
                                                const AnswerView& answer,
                                                std::string* missing_reason) const;

    // Region-selection scores used as ensemble auxiliaries. Missing data
    // yields 0 rather than a skip.
    double person_score(const Question& q, const AnswerView& answer) const;
    double object_score(const Question& q, const AnswerView& answer) const;

private:
    const EvalContext& ctx_;
};

// One selection-model training pair: a region feature vector and the phrase
// that names it.
struct SelectionPair {
    std::string phrase;
    std::vector<float> feature;
};

// CCA between region features and phrase embeddings, used for box selection.
CcaModel fit_selection_model(const std::vector<SelectionPair>& pairs,
                             const EmbeddingTable& embeddings, const CcaConfig& config);

struct FitReport {
    std::string key;
    std::size_t used = 0;
    std::size_t skipped = 0;
    std::size_t dim_x = 0, dim_y = 0, components = 0;
    std::vector<double> top_correlations; // up to 5
};

// Fits one model per (question type, cue model) pair needed by the score
// configurations, training on each question's correct answer. ctx supplies
// the stores and the already-fitted selection models; its cue_models map is
// not consulted.
std::map<std::string, CcaModel> fit_cue_models(
    const std::vector<Question>& train, const EvalContext& ctx,
    const std::vector<ScoreConfig>& configs, const CcaConfig& cca_default,
    const std::map<std::string, CcaConfig>& overrides = {},
    std::vector<FitReport>* reports = nullptr);

// Per-question audit record emitted alongside the table.
struct QuestionScore {
    std::string question_id;
    QuestionType qtype = QuestionType::Scene;
    Difficulty difficulty = Difficulty::easy;
    std::string config;
    bool skipped = false;
    std::string skip_reason;
    std::vector<std::string> cue_names;
    DenseMatrix per_cue; // C x 4 cosines
    std::array<double, 4> combined{};
    std::size_t chosen = 0;
    int correct_answer = 0;
    bool correct = false;
};

// Runs every configuration over every question and aggregates per
// (qtype, difficulty, config). Question-level parallelism per ctx.threads;
// results are independent of the thread count.
AccuracyTable evaluate(const std::vector<Question>& questions, const EvalContext& ctx,
                       const std::vector<ScoreConfig>& configs,
                       std::vector<QuestionScore>* audit = nullptr);

} // namespace cuerank
