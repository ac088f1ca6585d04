#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cuerank/matrix.hpp"

namespace cuerank {

// Preferred cue gets weight 1 - (C-1)*0.1, every other cue 0.1; the vector
// sums to 1. Valid for 1 <= C <= 10.
std::vector<double> combination_weights(std::size_t cue_count, std::size_t preferred_index);

// Weighted column sums of a C x 4 score matrix.
std::array<double, 4> combine_scores(const DenseMatrix& per_cue, std::span<const double> weights);

// Argmax over four finite scores; ties break to the lowest index.
std::size_t choose_answer(std::span<const double> combined);

// 0.9 * combined + 0.1 * auxiliary.
std::array<double, 4> attach_auxiliary(const std::array<double, 4>& combined,
                                       const std::array<double, 4>& auxiliary);

// Per-question-type cue roster: ordered cue-model names, the preferred cue,
// and the optional region-selection score attachments.
struct EnsembleConfig {
    std::string question_type;
    std::vector<std::string> cues;
    std::size_t preferred_index = 0;
    bool use_person_score = false;
    bool use_object_score = false;

    std::vector<double> weights() const { return combination_weights(cues.size(), preferred_index); }
    void validate() const;
};

} // namespace cuerank
