#include "cuerank/ensemble.hpp"

#include <cmath>

namespace cuerank {

std::vector<double> combination_weights(std::size_t cue_count, std::size_t preferred_index) {
    if (cue_count < 1)
        raise(ErrorCode::invalid_argument, "combination_weights: need at least one cue");
    if (cue_count > 10)
        raise(ErrorCode::config, "combination_weights: more than 10 cues would drive the "
                                 "preferred weight to zero or below");
    if (preferred_index >= cue_count)
        raise(ErrorCode::invalid_argument, "combination_weights: preferred index out of range");
    std::vector<double> weights(cue_count, 0.1);
    weights[preferred_index] = 1.0 - static_cast<double>(cue_count - 1) * 0.1;
    return weights;
}

std::array<double, 4> combine_scores(const DenseMatrix& per_cue, std::span<const double> weights) {
    per_cue.validate("combine_scores");
    if (per_cue.cols != 4)
        raise(ErrorCode::dimension_mismatch, "combine_scores: expected 4 answer columns");
    if (per_cue.rows != weights.size())
        raise(ErrorCode::dimension_mismatch,
              "combine_scores: weight count does not match cue rows");
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < per_cue.rows; ++c)
        for (std::size_t a = 0; a < 4; ++a) out[a] += weights[c] * per_cue.at(c, a);
    return out;
}

std::size_t choose_answer(std::span<const double> combined) {
    if (combined.size() != 4)
        raise(ErrorCode::dimension_mismatch, "choose_answer: expected 4 scores");
    for (double v : combined)
        if (!std::isfinite(v))
            raise(ErrorCode::invalid_argument, "choose_answer: non-finite score");
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i)
        if (combined[i] > combined[best]) best = i;
    return best;
}

std::array<double, 4> attach_auxiliary(const std::array<double, 4>& combined,
                                       const std::array<double, 4>& auxiliary) {
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) out[i] = 0.9 * combined[i] + 0.1 * auxiliary[i];
    return out;
}

void EnsembleConfig::validate() const {
    if (cues.empty())
        raise(ErrorCode::config, "ensemble for '" + question_type + "' names no cues");
    if (preferred_index >= cues.size())
        raise(ErrorCode::config,
              "ensemble for '" + question_type + "' has an out-of-range preferred cue");
    (void)combination_weights(cues.size(), preferred_index);
}

} // namespace cuerank
