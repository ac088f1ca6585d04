#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cuerank/cca.hpp"
#include "cuerank/matrix.hpp"
#include "cuerank/text.hpp"

namespace cuerank {

struct BoundingBox {
    double x = 0, y = 0; // top-left, pixels
    double w = 0, h = 0;
    double confidence = 0.0; // in [0, 1]
    std::string class_label;
    // Per-image detection index shared across person and object lists;
    // feature records for detections are keyed by it.
    std::uint32_t det_index = 0;
};

struct DetectionSet {
    std::string image_id;
    double image_w = 0, image_h = 0; // 0 = unknown, right/bottom unclipped
    std::vector<BoundingBox> persons;
    std::vector<BoundingBox> objects;
    std::size_t dropped_degenerate = 0; // zero-area boxes removed at load
};

// Tight axis-aligned bounding box of the inputs.
BoundingBox union_box(std::span<const BoundingBox> boxes);

// Indices of boxes passing confidence >= conf_threshold and both sides
// >= min_side, in input order.
std::vector<std::size_t> filter_person_indices(std::span<const BoundingBox> dets,
                                               double conf_threshold = 0.8,
                                               double min_side = 50.0);

// Surviving boxes in input order; when at least one survives, the union box
// of the survivors is appended (confidence = max of members).
std::vector<BoundingBox> filter_person_boxes(std::span<const BoundingBox> dets,
                                             double conf_threshold = 0.8,
                                             double min_side = 50.0);

struct RegionRef {
    enum class Kind { detection, union_box, whole_image };
    Kind kind = Kind::detection;
    std::uint32_t index = 0; // valid for detections

    bool operator==(const RegionRef&) const = default;
};

std::string region_ref_to_string(const RegionRef& ref);

struct RegionCandidate {
    RegionRef ref;
    std::vector<double> feature;
    double confidence = 0.0; // used for top-K truncation of object candidates
};

struct SelectionResult {
    RegionRef chosen;
    double score = 0.0; // CCA cosine
    PhraseChunk phrase;
};

// Argmax of similarity(model, candidate feature, phrase_vec). Ties break to
// the lowest detection index, with union box and whole image ordered last.
SelectionResult select_person_box(const CcaModel& person_model,
                                  std::span<const RegionCandidate> candidates,
                                  std::span<const double> phrase_vec,
                                  const PhraseChunk& phrase);

// Same scoring over candidates sorted by confidence descending and truncated
// to max_candidates before scoring.
SelectionResult select_object_box(const CcaModel& object_model,
                                  std::span<const RegionCandidate> candidates,
                                  std::span<const double> phrase_vec,
                                  const PhraseChunk& phrase,
                                  std::size_t max_candidates = 200);

// Set-matching kernel: mean over all entries of cosines^p. Odd p keeps the
// sign of negative cosines.
double kernel_score(const DenseMatrix& cosines, double p = 5.0);

// Text detections file: one box per line,
//   image_id kind(person|object) class_label confidence x y w h
// Lines with kind "image" declare image bounds (w h fields). Boxes are
// clipped to the declared bounds; boxes degenerate after clipping are
// dropped and counted. Grouped by image, insertion-ordered.
std::map<std::string, DetectionSet> load_detections(const std::string& path);

} // namespace cuerank
