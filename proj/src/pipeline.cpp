#include "cuerank/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cuerank/config.hpp"

namespace cuerank {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

RegionRole role_from_string(const std::string& name, const std::string& what) {
    if (name == "whole") return RegionRole::whole;
    if (name == "person") return RegionRole::person;
    if (name == "object") return RegionRole::object;
    raise(ErrorCode::config, what + ": unknown region role '" + name + "'");
}

CcaConfig parse_cca_section(const IniFile& ini, const std::string& section, CcaConfig base) {
    for (const auto& [key, value] : ini.items(section)) {
        const std::string what = "[" + section + "] " + key;
        if (key == "regularization") {
            base.regularization = parse_double_or_fail(value, what);
        } else if (key == "ridge_mode") {
            if (value == "scaled")
                base.ridge_mode = RidgeMode::scaled_by_trace;
            else if (value == "absolute")
                base.ridge_mode = RidgeMode::absolute;
            else
                raise(ErrorCode::config, what + ": expected 'scaled' or 'absolute'");
        } else if (key == "components") {
            long long v = parse_int_or_fail(value, what);
            if (v < 0) raise(ErrorCode::config, what + ": components must be >= 0");
            base.components = static_cast<std::size_t>(v);
        } else if (key == "correlation_power") {
            base.correlation_power = parse_double_or_fail(value, what);
        } else {
            raise(ErrorCode::config, what + ": unknown key");
        }
    }
    return base;
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    IniFile ini = IniFile::parse_file(path);
    RunConfig cfg;
    cfg.base_dir = fs::path(path).parent_path().string();
    if (cfg.base_dir.empty()) cfg.base_dir = ".";

    for (const auto& [key, value] : ini.items("paths")) {
        const std::string resolved = resolve(cfg.base_dir, value);
        if (key == "embeddings")
            cfg.embeddings_path = resolved;
        else if (key == "questions_train")
            cfg.questions_train_path = resolved;
        else if (key == "questions_test")
            cfg.questions_test_path = resolved;
        else if (key == "detections")
            cfg.detections_path = resolved;
        else if (key == "person_vocab")
            cfg.person_vocab_path = resolved;
        else if (key == "object_vocab")
            cfg.object_vocab_path = resolved;
        else if (key == "model_dir")
            cfg.model_dir = resolved;
        else
            raise(ErrorCode::config, "[paths] " + key + ": unknown key");
    }

    for (const auto& [key, value] : ini.items("cues")) {
        long long dim = parse_int_or_fail(value, "[cues] " + key);
        if (dim <= 0) raise(ErrorCode::config, "[cues] " + key + ": dimension must be positive");
        cfg.extra_cues.emplace_back(key, static_cast<std::size_t>(dim));
    }

    for (const auto& [key, value] : ini.items("features"))
        cfg.feature_files[key] = resolve(cfg.base_dir, value);

    for (const auto& [key, value] : ini.items("selection")) {
        if (key == "person_pairs_features")
            cfg.person_pairs_features = resolve(cfg.base_dir, value);
        else if (key == "person_pairs_phrases")
            cfg.person_pairs_phrases = resolve(cfg.base_dir, value);
        else if (key == "object_pairs_features")
            cfg.object_pairs_features = resolve(cfg.base_dir, value);
        else if (key == "object_pairs_phrases")
            cfg.object_pairs_phrases = resolve(cfg.base_dir, value);
        else if (key == "person_feature_cue")
            cfg.person_select_cue = value;
        else if (key == "object_feature_cue")
            cfg.object_select_cue = value;
        else
            raise(ErrorCode::config, "[selection] " + key + ": unknown key");
    }

    cfg.cca_default = parse_cca_section(ini, "cca", CcaConfig{});

    for (const auto& [key, value] : ini.items("runtime")) {
        if (key == "threads") {
            long long v = parse_int_or_fail(value, "[runtime] threads");
            cfg.threads = static_cast<int>(v);
        } else if (key == "person_conf_threshold") {
            cfg.person_conf_threshold = parse_double_or_fail(value, "[runtime] " + key);
        } else if (key == "person_min_side") {
            cfg.person_min_side = parse_double_or_fail(value, "[runtime] " + key);
        } else if (key == "object_max_candidates") {
            cfg.object_max_candidates =
                static_cast<std::size_t>(parse_int_or_fail(value, "[runtime] " + key));
        } else if (key == "kernel_p") {
            cfg.kernel_p = parse_double_or_fail(value, "[runtime] " + key);
        } else {
            raise(ErrorCode::config, "[runtime] " + key + ": unknown key");
        }
    }

    // [cue.<name>] sections define cue models; [cca.<name>] override the fit.
    std::map<std::string, ScoreConfig> score_configs;
    std::vector<std::string> score_order;
    for (const std::string& section : ini.section_order()) {
        if (section.rfind("cue.", 0) == 0) {
            CueModelSpec spec;
            spec.name = section.substr(4);
            if (spec.name.empty()) raise(ErrorCode::config, "[cue.] missing cue model name");
            auto parts = ini.get(section, "parts");
            if (!parts) raise(ErrorCode::config, "[" + section + "] needs a parts key");
            for (const std::string& item : split_list(*parts)) {
                std::size_t colon = item.find(':');
                if (colon == std::string::npos)
                    raise(ErrorCode::config,
                          "[" + section + "] parts entries look like role:cue_kind");
                CuePart part;
                part.role = role_from_string(trim(std::string_view(item).substr(0, colon)),
                                             "[" + section + "]");
                part.cue_kind = trim(std::string_view(item).substr(colon + 1));
                if (part.cue_kind.empty())
                    raise(ErrorCode::config, "[" + section + "] empty cue kind");
                spec.parts.push_back(std::move(part));
            }
            if (spec.parts.empty()) raise(ErrorCode::config, "[" + section + "] has no parts");
            cfg.cue_specs[spec.name] = std::move(spec);
        } else if (section.rfind("cca.", 0) == 0) {
            cfg.cca_overrides[section.substr(4)] =
                parse_cca_section(ini, section, cfg.cca_default);
        } else if (section.rfind("config.", 0) == 0) {
            // config.<name>.<QuestionType>
            std::string rest = section.substr(7);
            std::size_t dot = rest.rfind('.');
            if (dot == std::string::npos || dot == 0)
                raise(ErrorCode::config,
                      "[" + section + "]: expected [config.<name>.<QuestionType>]");
            std::string cfg_name = rest.substr(0, dot);
            QuestionType qtype = question_type_from_string(rest.substr(dot + 1));
            if (!score_configs.count(cfg_name)) {
                score_configs[cfg_name].name = cfg_name;
                score_order.push_back(cfg_name);
            }
            EnsembleConfig e;
            e.question_type = to_string(qtype);
            auto cues = ini.get(section, "cues");
            if (!cues) raise(ErrorCode::config, "[" + section + "] needs a cues key");
            e.cues = split_list(*cues);
            if (e.cues.empty()) raise(ErrorCode::config, "[" + section + "] names no cues");
            auto preferred = ini.get(section, "preferred");
            std::string pref = preferred ? trim(*preferred) : e.cues.front();
            auto it = std::find(e.cues.begin(), e.cues.end(), pref);
            if (it == e.cues.end())
                raise(ErrorCode::config,
                      "[" + section + "] preferred cue '" + pref + "' is not in the cue list");
            e.preferred_index = static_cast<std::size_t>(it - e.cues.begin());
            if (auto v = ini.get(section, "person_score"))
                e.use_person_score = parse_bool_or_fail(*v, "[" + section + "] person_score");
            if (auto v = ini.get(section, "object_score"))
                e.use_object_score = parse_bool_or_fail(*v, "[" + section + "] object_score");
            if (auto v = ini.get(section, "zscore"))
                score_configs[cfg_name].zscore =
                    parse_bool_or_fail(*v, "[" + section + "] zscore");
            score_configs[cfg_name].per_type[qtype] = std::move(e);
        }
    }
    for (const std::string& name : score_order)
        cfg.score_configs.push_back(std::move(score_configs[name]));

    if (cfg.cue_specs.empty()) cfg.cue_specs = default_cue_specs();
    if (cfg.score_configs.empty()) cfg.score_configs = default_score_configs();
    for (const ScoreConfig& sc : cfg.score_configs)
        for (const auto& [t, e] : sc.per_type) {
            e.validate();
            for (const std::string& cue : e.cues)
                if (!cfg.cue_specs.count(cue))
                    raise(ErrorCode::config, "configuration '" + sc.name +
                                                 "' references unknown cue model '" + cue + "'");
        }

    if (ini.has_section("synth")) {
        SyntheticSpec spec;
        for (const auto& [key, value] : ini.items("synth")) {
            const std::string what = "[synth] " + key;
            if (key == "seed")
                spec.seed = static_cast<std::uint64_t>(parse_int_or_fail(value, what));
            else if (key == "n_train")
                spec.n_train = static_cast<std::size_t>(parse_int_or_fail(value, what));
            else if (key == "n_test")
                spec.n_test = static_cast<std::size_t>(parse_int_or_fail(value, what));
            else if (key == "latent_dim")
                spec.latent_dim = static_cast<std::size_t>(parse_int_or_fail(value, what));
            else if (key == "signal_correlation")
                spec.signal_correlation = parse_double_or_fail(value, what);
            else if (key == "noise_scale")
                spec.noise_scale = parse_double_or_fail(value, what);
            else if (key == "distractor_mode")
                spec.distractor_mode = distractor_mode_from_string(value);
            else if (key == "near_miss_alpha")
                spec.near_miss_alpha = parse_double_or_fail(value, what);
            else if (key == "person_detections")
                spec.person_detections = static_cast<std::size_t>(parse_int_or_fail(value, what));
            else if (key == "object_detections")
                spec.object_detections = static_cast<std::size_t>(parse_int_or_fail(value, what));
            else if (key == "selection_pairs")
                spec.selection_pairs = static_cast<std::size_t>(parse_int_or_fail(value, what));
            else if (key == "question_types") {
                spec.question_types.clear();
                for (const std::string& name : split_list(value))
                    spec.question_types.push_back(question_type_from_string(name));
            } else if (key == "cue") {
                // cue = <name> <role> <dim> [signal] [lo:hi]
                std::istringstream fields(value);
                SyntheticCueSpec cue;
                std::string role;
                if (!(fields >> cue.name >> role >> cue.dim))
                    raise(ErrorCode::config, what + ": expected '<name> <role> <dim>'");
                cue.role = role_from_string(role, what);
                double signal;
                if (fields >> signal) cue.signal = signal;
                std::string slice;
                if (fields >> slice) {
                    std::size_t colon = slice.find(':');
                    if (colon == std::string::npos)
                        raise(ErrorCode::config, what + ": latent slice looks like lo:hi");
                    cue.latent_begin = static_cast<std::size_t>(
                        parse_int_or_fail(slice.substr(0, colon), what));
                    cue.latent_end = static_cast<std::size_t>(
                        parse_int_or_fail(slice.substr(colon + 1), what));
                }
                spec.cues.push_back(std::move(cue));
            } else if (key == "out_dir") {
                cfg.synth_out_dir = resolve(cfg.base_dir, value);
            } else {
                raise(ErrorCode::config, what + ": unknown key");
            }
        }
        if (cfg.synth_out_dir.empty()) cfg.synth_out_dir = cfg.base_dir;
        cfg.synth = std::move(spec);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Shared loading
// ---------------------------------------------------------------------------

namespace {

struct LoadedData {
    CueRegistry registry;
    FeatureStore store;
    EmbeddingTable embeddings;
    Vocabulary person_vocab;
    Vocabulary object_vocab;
    std::map<std::string, DetectionSet> detections;
};

LoadedData load_data(const RunConfig& cfg) {
    LoadedData data;
    data.registry = CueRegistry::with_standard_kinds();
    for (const auto& [name, dim] : cfg.extra_cues) data.registry.register_kind(name, dim);

    if (cfg.embeddings_path.empty())
        raise(ErrorCode::config, "config is missing [paths] embeddings");
    data.embeddings = load_embeddings(cfg.embeddings_path);

    for (const auto& [cue, path] : cfg.feature_files)
        data.store.load_file(path, data.registry.require(cue));

    if (!cfg.person_vocab_path.empty()) data.person_vocab = load_vocabulary(cfg.person_vocab_path);
    if (!cfg.object_vocab_path.empty()) data.object_vocab = load_vocabulary(cfg.object_vocab_path);
    if (!cfg.detections_path.empty()) data.detections = load_detections(cfg.detections_path);
    return data;
}

EvalContext make_context(const RunConfig& cfg, const LoadedData& data,
                         const std::map<std::string, CcaModel>& cue_models,
                         const CcaModel* person_select, const CcaModel* object_select,
                         int threads) {
    EvalContext ctx;
    ctx.registry = &data.registry;
    ctx.store = &data.store;
    ctx.embeddings = &data.embeddings;
    ctx.cue_models = &cue_models;
    ctx.person_select = person_select;
    ctx.object_select = object_select;
    ctx.person_select_cue = cfg.person_select_cue;
    ctx.object_select_cue = cfg.object_select_cue;
    ctx.detections = &data.detections;
    ctx.person_vocab = &data.person_vocab;
    ctx.object_vocab = &data.object_vocab;
    ctx.cue_specs = &cfg.cue_specs;
    ctx.person_conf_threshold = cfg.person_conf_threshold;
    ctx.person_min_side = cfg.person_min_side;
    ctx.object_max_candidates = cfg.object_max_candidates;
    ctx.kernel_p = cfg.kernel_p;
    ctx.threads = threads;
    return ctx;
}

int effective_threads(const RunConfig& cfg, const RunOptions& opt) {
    int threads = opt.threads.value_or(cfg.threads);
    if (threads <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return threads;
}

std::string settings_header(const RunConfig& cfg) {
    std::ostringstream os;
    char buf[128];
    os << "settings:\n";
    std::snprintf(buf, sizeof(buf),
                  "  cca: regularization=%g (%s), components=%zu (0=auto min(dims,300)), "
                  "correlation_power=%g\n",
                  cfg.cca_default.regularization,
                  cfg.cca_default.ridge_mode == RidgeMode::scaled_by_trace ? "scaled by trace/dim"
                                                                           : "absolute",
                  cfg.cca_default.components, cfg.cca_default.correlation_power);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "  regions: person confidence>=%g, min side=%g px, object top-%zu, kernel p=%g\n",
                  cfg.person_conf_threshold, cfg.person_min_side, cfg.object_max_candidates,
                  cfg.kernel_p);
    os << buf;
    os << "  weights: preferred cue 1-(C-1)*0.1, others 0.1; auxiliary mix 0.9/0.1 after the "
          "main combination\n";
    return os.str();
}

// Selection-model training pairs: an FVEC feature file plus a tab-separated
// id -> phrase file.
std::vector<SelectionPair> load_selection_pairs(const std::string& features_path,
                                                const std::string& phrases_path,
                                                const CueKind& kind) {
    FeatureStore store;
    store.load_file(features_path, kind);
    std::ifstream is(phrases_path);
    if (!is) raise(ErrorCode::io, "cannot open phrases file: " + phrases_path);
    std::map<std::string, std::string> phrases;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            raise(ErrorCode::parse,
                  phrases_path + ":" + std::to_string(line_no) + ": expected id<TAB>phrase");
        phrases[line.substr(0, tab)] = line.substr(tab + 1);
    }
    std::vector<SelectionPair> pairs;
    for (const FeatureRecord& rec : store.records()) {
        auto it = phrases.find(rec.image_id);
        if (it == phrases.end())
            raise(ErrorCode::missing_data,
                  "no phrase for selection pair '" + rec.image_id + "' in " + phrases_path);
        pairs.push_back(SelectionPair{it->second, rec.vector});
    }
    if (pairs.empty()) raise(ErrorCode::missing_data, "no selection pairs in " + features_path);
    return pairs;
}

std::string model_path(const RunConfig& cfg, const std::string& stem) {
    return (fs::path(cfg.model_dir) / (stem + ".cca")).string();
}

// (type, cue model) pairs needed by the score configurations, restricted to
// the question types present.
std::set<std::pair<QuestionType, std::string>> needed_models(
    const RunConfig& cfg, const std::vector<Question>& questions) {
    std::set<QuestionType> present;
    for (const Question& q : questions) present.insert(q.qtype);
    std::set<std::pair<QuestionType, std::string>> out;
    for (const ScoreConfig& sc : cfg.score_configs)
        for (const auto& [t, e] : sc.per_type) {
            if (!present.count(t)) continue;
            for (const std::string& cue : e.cues) out.emplace(t, cue);
        }
    return out;
}

// Whether any needed (type, cue) pair resolves `role` parts by box selection
// rather than the gt box: true for group-a questions and whenever the part's
// role does not match the question's focus-box group.
bool selection_needed(const RunConfig& cfg,
                      const std::set<std::pair<QuestionType, std::string>>& pairs,
                      RegionRole role) {
    for (const auto& [t, cue] : pairs) {
        const QuestionGroup group = group_of(t);
        const bool gt_path = (role == RegionRole::person && group == QuestionGroup::person) ||
                             (role == RegionRole::object && group == QuestionGroup::object);
        if (gt_path) continue;
        for (const CuePart& part : cfg.cue_specs.at(cue).parts)
            if (part.role == role) return true;
    }
    if (role == RegionRole::person)
        for (const ScoreConfig& sc : cfg.score_configs)
            for (const auto& [t, e] : sc.per_type)
                if (e.use_person_score) return true;
    if (role == RegionRole::object)
        for (const ScoreConfig& sc : cfg.score_configs)
            for (const auto& [t, e] : sc.per_type)
                if (e.use_object_score) return true;
    return false;
}

} // namespace

std::string cmd_fit(const RunConfig& cfg, const RunOptions& opt) {
    std::ostringstream report;
    report << settings_header(cfg);

    if (cfg.questions_train_path.empty())
        raise(ErrorCode::config, "config is missing [paths] questions_train");
    LoadedData data = load_data(cfg);
    std::vector<Question> train = load_questions(cfg.questions_train_path);
    if (train.empty()) raise(ErrorCode::missing_data, "no training questions");

    fs::create_directories(cfg.model_dir);

    auto pairs_needed = needed_models(cfg, train);

    // Selection models first; cue-model training for group-a questions
    // depends on them.
    std::optional<CcaModel> person_select, object_select;
    const bool need_person_sel = selection_needed(cfg, pairs_needed, RegionRole::person);
    const bool need_object_sel = selection_needed(cfg, pairs_needed, RegionRole::object);
    if (need_person_sel) {
        if (cfg.person_pairs_features.empty())
            raise(ErrorCode::config,
                  "person-box selection is needed but [selection] person_pairs_features is not set");
        auto pairs = load_selection_pairs(cfg.person_pairs_features, cfg.person_pairs_phrases,
                                          data.registry.require(cfg.person_select_cue));
        person_select = fit_selection_model(pairs, data.embeddings, cfg.cca_default);
        save_cca_model(*person_select, model_path(cfg, "person_select"));
        report << "fitted person_select on " << pairs.size() << " pairs (dims "
               << person_select->dim_x() << "x" << person_select->dim_y() << ", k="
               << person_select->components() << ")\n";
    }
    if (need_object_sel) {
        if (cfg.object_pairs_features.empty())
            raise(ErrorCode::config,
                  "object-box selection is needed but [selection] object_pairs_features is not set");
        auto pairs = load_selection_pairs(cfg.object_pairs_features, cfg.object_pairs_phrases,
                                          data.registry.require(cfg.object_select_cue));
        object_select = fit_selection_model(pairs, data.embeddings, cfg.cca_default);
        save_cca_model(*object_select, model_path(cfg, "object_select"));
        report << "fitted object_select on " << pairs.size() << " pairs (dims "
               << object_select->dim_x() << "x" << object_select->dim_y() << ", k="
               << object_select->components() << ")\n";
    }

    std::map<std::string, CcaModel> no_models;
    EvalContext ctx = make_context(cfg, data, no_models,
                                   person_select ? &*person_select : nullptr,
                                   object_select ? &*object_select : nullptr,
                                   effective_threads(cfg, opt));

    std::vector<FitReport> reports;
    std::map<std::string, CcaModel> models =
        fit_cue_models(train, ctx, cfg.score_configs, cfg.cca_default, cfg.cca_overrides,
                       &reports);
    char buf[160];
    for (const auto& [key, model] : models) save_cca_model(model, model_path(cfg, key));
    for (const FitReport& rep : reports) {
        std::snprintf(buf, sizeof(buf), "fitted %s: n=%zu skipped=%zu dims=%zux%zu k=%zu corr=[",
                      rep.key.c_str(), rep.used, rep.skipped, rep.dim_x, rep.dim_y,
                      rep.components);
        report << buf;
        for (std::size_t j = 0; j < rep.top_correlations.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%s%.4f", j ? " " : "", rep.top_correlations[j]);
            report << buf;
        }
        report << "]\n";
    }
    report << "model files written to " << cfg.model_dir << "\n";
    return report.str();
}

namespace {

std::map<std::string, CcaModel> load_cue_models(
    const RunConfig& cfg, const std::set<std::pair<QuestionType, std::string>>& pairs) {
    std::map<std::string, CcaModel> models;
    for (const auto& [qtype, cue] : pairs) {
        const std::string key = cue_model_key(qtype, cue);
        const std::string path = model_path(cfg, key);
        if (!fs::exists(path))
            raise(ErrorCode::missing_data, "missing model file: " + path + " (run fit first)");
        models.emplace(key, load_cca_model(path));
    }
    return models;
}

nlohmann::json audit_to_json(const std::vector<QuestionScore>& audit) {
    nlohmann::json arr = nlohmann::json::array();
    for (const QuestionScore& qs : audit) {
        nlohmann::json item;
        item["id"] = qs.question_id;
        item["qtype"] = to_string(qs.qtype);
        item["difficulty"] = to_string(qs.difficulty);
        item["config"] = qs.config;
        if (qs.skipped) {
            item["skipped"] = true;
            item["reason"] = qs.skip_reason;
        } else {
            nlohmann::json per_cue = nlohmann::json::object();
            for (std::size_t c = 0; c < qs.cue_names.size(); ++c) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t a = 0; a < 4; ++a) row.push_back(qs.per_cue.at(c, a));
                per_cue[qs.cue_names[c]] = row;
            }
            item["per_cue"] = per_cue;
            item["combined"] = qs.combined;
            item["chosen"] = qs.chosen;
            item["correct_answer"] = qs.correct_answer;
            item["correct"] = qs.correct;
        }
        arr.push_back(std::move(item));
    }
    return arr;
}

} // namespace

std::string cmd_eval(const RunConfig& cfg, const RunOptions& opt) {
    if (cfg.questions_test_path.empty())
        raise(ErrorCode::config, "config is missing [paths] questions_test");
    LoadedData data = load_data(cfg);
    std::vector<Question> questions = load_questions(cfg.questions_test_path);

    auto pairs = needed_models(cfg, questions);
    std::map<std::string, CcaModel> cue_models = load_cue_models(cfg, pairs);

    std::optional<CcaModel> person_select, object_select;
    if (fs::exists(model_path(cfg, "person_select")))
        person_select = load_cca_model(model_path(cfg, "person_select"));
    if (fs::exists(model_path(cfg, "object_select")))
        object_select = load_cca_model(model_path(cfg, "object_select"));

    EvalContext ctx = make_context(cfg, data, cue_models,
                                   person_select ? &*person_select : nullptr,
                                   object_select ? &*object_select : nullptr,
                                   effective_threads(cfg, opt));

    std::vector<QuestionScore> audit;
    std::vector<QuestionScore>* audit_ptr = opt.json_scores_path ? &audit : nullptr;
    AccuracyTable table = evaluate(questions, ctx, cfg.score_configs, audit_ptr);

    if (opt.json_scores_path) {
        nlohmann::json doc;
        doc["aux_order"] = "after_main"; // auxiliary 0.9/0.1 mix applied after the weighted sum
        doc["weight_scheme"] = "preferred 1-(C-1)*0.1, others 0.1";
        doc["questions"] = audit_to_json(audit);
        std::ofstream os(*opt.json_scores_path);
        if (!os) raise(ErrorCode::io, "cannot write scores file: " + *opt.json_scores_path);
        os << doc.dump(2) << '\n';
    }

    std::ostringstream out;
    if (opt.format == TableFormat::text) out << settings_header(cfg);
    out << render_table(table, opt.format);
    return out.str();
}

std::string cmd_synth(const RunConfig& cfg, const RunOptions& opt) {
    if (!cfg.synth) raise(ErrorCode::config, "config has no [synth] section");
    SyntheticSpec spec = *cfg.synth;
    if (opt.seed) spec.seed = *opt.seed;
    SyntheticDataset dataset = generate_synthetic(spec);
    const std::string config_path = write_synthetic(dataset, spec, cfg.synth_out_dir);

    std::ostringstream report;
    report << "synthetic dataset written to " << cfg.synth_out_dir << "\n";
    report << "  seed " << spec.seed << ", mode " << to_string(spec.distractor_mode) << "\n";
    report << "  " << dataset.train_questions.size() << " train / "
           << dataset.test_questions.size() << " test questions, "
           << dataset.store.size() << " feature records, " << dataset.embeddings.size()
           << " embedding tokens\n";
    report << "  run config: " << config_path << "\n";
    return report.str();
}

std::string cmd_select_regions(const RunConfig& cfg, const RunOptions& opt,
                               const std::string& image_id, const std::string& answer_text) {
    LoadedData data = load_data(cfg);
    if (data.detections.find(image_id) == data.detections.end())
        raise(ErrorCode::missing_data, "unknown image id: " + image_id);

    std::optional<CcaModel> person_select, object_select;
    if (fs::exists(model_path(cfg, "person_select")))
        person_select = load_cca_model(model_path(cfg, "person_select"));
    if (fs::exists(model_path(cfg, "object_select")))
        object_select = load_cca_model(model_path(cfg, "object_select"));

    std::map<std::string, CcaModel> no_models;
    EvalContext ctx = make_context(cfg, data, no_models,
                                   person_select ? &*person_select : nullptr,
                                   object_select ? &*object_select : nullptr,
                                   effective_threads(cfg, opt));
    FeatureAssembler assembler(ctx);
    FeatureAssembler::AnswerView view = assembler.make_answer_view(answer_text);

    std::ostringstream os;
    os << "answer: " << answer_text << "\n";
    const DetectionSet& dets = data.detections.at(image_id);
    std::vector<std::size_t> kept =
        filter_person_indices(dets.persons, cfg.person_conf_threshold, cfg.person_min_side);

    bool any_person = false, any_object = false;
    char buf[160];
    for (const PhraseChunk& chunk : view.chunks) {
        std::string phrase_text;
        for (std::size_t i = 0; i < chunk.tokens.size(); ++i)
            phrase_text += (i ? " " : "") + chunk.tokens[i];
        EmbedResult phrase = embed_text(data.embeddings, chunk.tokens);
        if (phrase.known_fraction == 0.0) {
            os << (chunk.kind == ChunkKind::person ? "person" : "object") << " phrase '"
               << phrase_text << "': no known tokens, not matched\n";
            (chunk.kind == ChunkKind::person ? any_person : any_object) = true;
            continue;
        }
        if (chunk.kind == ChunkKind::person) {
            any_person = true;
            if (!person_select) {
                os << "person phrase '" << phrase_text << "': no person_select model\n";
                continue;
            }
            // Candidates built the same way evaluation builds them.
            std::vector<RegionCandidate> candidates;
            std::vector<const FeatureRecord*> members;
            for (std::size_t i : kept) {
                const std::uint32_t det = dets.persons[i].det_index;
                const FeatureRecord* rec =
                    data.store.find(image_id, RegionId::detection(det), cfg.person_select_cue);
                if (!rec) continue;
                RegionCandidate cand;
                cand.ref = RegionRef{RegionRef::Kind::detection, det};
                cand.feature.assign(rec->vector.begin(), rec->vector.end());
                cand.confidence = dets.persons[i].confidence;
                candidates.push_back(std::move(cand));
                members.push_back(rec);
            }
            if (!members.empty()) {
                RegionCandidate uni;
                uni.ref = RegionRef{RegionRef::Kind::union_box, 0};
                uni.feature = pool_regions(members);
                candidates.push_back(std::move(uni));
            }
            if (candidates.empty()) {
                os << "person phrase '" << phrase_text << "': no usable person boxes\n";
                continue;
            }
            SelectionResult sel =
                select_person_box(*person_select, candidates, phrase.vector, chunk);
            std::snprintf(buf, sizeof(buf), "person phrase '%s' -> %s (score %.4f)\n",
                          phrase_text.c_str(), region_ref_to_string(sel.chosen).c_str(),
                          sel.score);
            os << buf;
        } else {
            any_object = true;
            if (!object_select) {
                os << "object phrase '" << phrase_text << "': no object_select model\n";
                continue;
            }
            std::vector<RegionCandidate> candidates;
            for (std::size_t i = 0; i < dets.objects.size(); ++i) {
                const std::uint32_t det = dets.objects[i].det_index;
                const FeatureRecord* rec =
                    data.store.find(image_id, RegionId::detection(det), cfg.object_select_cue);
                if (!rec) continue;
                RegionCandidate cand;
                cand.ref = RegionRef{RegionRef::Kind::detection, det};
                cand.feature.assign(rec->vector.begin(), rec->vector.end());
                cand.confidence = dets.objects[i].confidence;
                candidates.push_back(std::move(cand));
            }
            if (candidates.empty()) {
                os << "object phrase '" << phrase_text << "': no usable object boxes\n";
                continue;
            }
            SelectionResult sel = select_object_box(*object_select, candidates, phrase.vector,
                                                    chunk, cfg.object_max_candidates);
            std::snprintf(buf, sizeof(buf), "object phrase '%s' -> %s (score %.4f)\n",
                          phrase_text.c_str(), region_ref_to_string(sel.chosen).c_str(),
                          sel.score);
            os << buf;
        }
    }
    if (!any_person) {
        os << "no person words found: all person boxes are selected (";
        if (kept.empty()) {
            os << "none survive filtering; whole image used";
        } else {
            for (std::size_t i = 0; i < kept.size(); ++i)
                os << (i ? ", " : "") << "detection:" << dets.persons[kept[i]].det_index;
        }
        os << ")\n";
    }
    if (!any_object) os << "no object words found\n";
    return os.str();
}

std::string cmd_inspect_model(const std::string& model_path_arg) {
    CcaModel model = load_cca_model(model_path_arg);
    std::ostringstream os;
    char buf[160];
    os << "model: " << model_path_arg << "\n";
    std::snprintf(buf, sizeof(buf), "  dim_x=%zu dim_y=%zu components=%zu\n", model.dim_x(),
                  model.dim_y(), model.components());
    os << buf;
    std::snprintf(buf, sizeof(buf), "  correlation_power=%g regularization=%g\n",
                  model.config.correlation_power, model.config.regularization);
    os << buf;
    os << "  top correlations: [";
    const std::size_t top = std::min<std::size_t>(5, model.correlations.size());
    for (std::size_t j = 0; j < top; ++j) {
        std::snprintf(buf, sizeof(buf), "%s%.6f", j ? " " : "", model.correlations[j]);
        os << buf;
    }
    os << "]\n";
    return os.str();
}

} // namespace cuerank
