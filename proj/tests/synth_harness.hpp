// Shared test fixture: generates a synthetic dataset in memory, fits the
// selection and cue models, and exposes a ready EvalContext.

#pragma once

#include <map>
#include <optional>

#include "cuerank/eval.hpp"
#include "cuerank/synthetic.hpp"

namespace harness {

struct Pipeline {
    cuerank::SyntheticDataset data;
    std::optional<cuerank::CcaModel> person_select;
    std::optional<cuerank::CcaModel> object_select;
    std::map<std::string, cuerank::CcaModel> models;

    cuerank::EvalContext context(int threads = 1) const {
        cuerank::EvalContext ctx;
        ctx.registry = &data.registry;
        ctx.store = &data.store;
        ctx.embeddings = &data.embeddings;
        ctx.cue_models = &models;
        ctx.person_select = person_select ? &*person_select : nullptr;
        ctx.object_select = object_select ? &*object_select : nullptr;
        ctx.person_select_cue = data.person_select_cue;
        ctx.object_select_cue = data.object_select_cue;
        ctx.detections = &data.detections;
        ctx.person_vocab = &data.person_vocab;
        ctx.object_vocab = &data.object_vocab;
        ctx.cue_specs = &data.cue_specs;
        ctx.threads = threads;
        return ctx;
    }
};

inline Pipeline build_pipeline(const cuerank::SyntheticSpec& spec,
                               const cuerank::CcaConfig& cca = {}) {
    Pipeline p;
    p.data = cuerank::generate_synthetic(spec);
    if (!p.data.person_pairs.empty())
        p.person_select =
            cuerank::fit_selection_model(p.data.person_pairs, p.data.embeddings, cca);
    if (!p.data.object_pairs.empty())
        p.object_select =
            cuerank::fit_selection_model(p.data.object_pairs, p.data.embeddings, cca);
    cuerank::EvalContext ctx = p.context();
    p.models = cuerank::fit_cue_models(p.data.train_questions, ctx, p.data.score_configs, cca);
    return p;
}

inline double overall_accuracy(const cuerank::AccuracyTable& table, const std::string& config) {
    return table.overall(config).accuracy();
}

} // namespace harness
