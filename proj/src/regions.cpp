#include "cuerank/regions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

namespace cuerank {

BoundingBox union_box(std::span<const BoundingBox> boxes) {
    if (boxes.empty()) raise(ErrorCode::invalid_argument, "union_box: empty box list");
    double x0 = std::numeric_limits<double>::infinity();
    double y0 = std::numeric_limits<double>::infinity();
    double x1 = -std::numeric_limits<double>::infinity();
    double y1 = -std::numeric_limits<double>::infinity();
    double conf = 0.0;
    for (const BoundingBox& b : boxes) {
        x0 = std::min(x0, b.x);
        y0 = std::min(y0, b.y);
        x1 = std::max(x1, b.x + b.w);
        y1 = std::max(y1, b.y + b.h);
        conf = std::max(conf, b.confidence);
    }
    BoundingBox u;
    u.x = x0;
    u.y = y0;
    u.w = x1 - x0;
    u.h = y1 - y0;
    u.confidence = conf;
    u.class_label = "union";
    return u;
}

std::vector<std::size_t> filter_person_indices(std::span<const BoundingBox> dets,
                                               double conf_threshold, double min_side) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const BoundingBox& b = dets[i];
        if (b.confidence >= conf_threshold && b.w >= min_side && b.h >= min_side)
            kept.push_back(i);
    }
    return kept;
}

std::vector<BoundingBox> filter_person_boxes(std::span<const BoundingBox> dets,
                                             double conf_threshold, double min_side) {
    std::vector<BoundingBox> out;
    for (std::size_t i : filter_person_indices(dets, conf_threshold, min_side))
        out.push_back(dets[i]);
    if (!out.empty()) out.push_back(union_box(out));
    return out;
}

std::string region_ref_to_string(const RegionRef& ref) {
    switch (ref.kind) {
        case RegionRef::Kind::detection: return "detection:" + std::to_string(ref.index);
        case RegionRef::Kind::union_box: return "union_box";
        case RegionRef::Kind::whole_image: return "whole_image";
    }
    return "?";
}

namespace {

// Ordering used for tie-breaks: detections by index, union box after any
// detection, whole image last.
std::uint64_t ref_order(const RegionRef& ref) {
    switch (ref.kind) {
        case RegionRef::Kind::detection: return ref.index;
        case RegionRef::Kind::union_box: return (1ull << 32);
        case RegionRef::Kind::whole_image: return (1ull << 33);
    }
    return ~0ull;
}

SelectionResult select_best(const CcaModel& model, std::span<const RegionCandidate> candidates,
                            std::span<const double> phrase_vec, const PhraseChunk& phrase,
                            const char* what) {
    if (candidates.empty())
        raise(ErrorCode::invalid_argument, std::string(what) + ": no candidate regions");

    // Project the phrase once; candidates are scored against it.
    std::vector<double> py = project_y(model, phrase_vec);
    double ny = 0.0;
    for (double v : py) ny += v * v;
    ny = std::sqrt(ny);

    SelectionResult best;
    bool have = false;
    std::uint64_t best_order = 0;
    for (const RegionCandidate& cand : candidates) {
        std::vector<double> px = project_x(model, cand.feature);
        double dot = 0.0, nx = 0.0;
        for (std::size_t i = 0; i < px.size(); ++i) {
            dot += px[i] * py[i];
            nx += px[i] * px[i];
        }
        nx = std::sqrt(nx);
        const double score =
            (nx < 1e-12 || ny < 1e-12) ? 0.0 : std::clamp(dot / (nx * ny), -1.0, 1.0);
        const std::uint64_t order = ref_order(cand.ref);
        if (!have || score > best.score || (score == best.score && order < best_order)) {
            best.chosen = cand.ref;
            best.score = score;
            best_order = order;
            have = true;
        }
    }
    best.phrase = phrase;
    return best;
}

} // namespace

SelectionResult select_person_box(const CcaModel& person_model,
                                  std::span<const RegionCandidate> candidates,
                                  std::span<const double> phrase_vec,
                                  const PhraseChunk& phrase) {
    return select_best(person_model, candidates, phrase_vec, phrase, "select_person_box");
}

SelectionResult select_object_box(const CcaModel& object_model,
                                  std::span<const RegionCandidate> candidates,
                                  std::span<const double> phrase_vec, const PhraseChunk& phrase,
                                  std::size_t max_candidates) {
    if (candidates.empty())
        raise(ErrorCode::invalid_argument, "select_object_box: no candidate regions");
    std::vector<RegionCandidate> sorted(candidates.begin(), candidates.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const RegionCandidate& a, const RegionCandidate& b) {
                         return a.confidence > b.confidence;
                     });
    if (sorted.size() > max_candidates) sorted.resize(max_candidates);
    return select_best(object_model, sorted, phrase_vec, phrase, "select_object_box");
}

double kernel_score(const DenseMatrix& cosines, double p) {
    cosines.validate("kernel_score");
    if (cosines.rows == 0 || cosines.cols == 0)
        raise(ErrorCode::invalid_argument, "kernel_score: empty matrix");
    double sum = 0.0;
    for (double c : cosines.values) sum += std::pow(c, p);
    return sum / static_cast<double>(cosines.rows * cosines.cols);
}

namespace {

bool parse_double_field(std::string_view s, double& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

// Clip to [0, image_w] x [0, image_h]; unknown bounds clip at 0 only.
bool clip_box(BoundingBox& b, double image_w, double image_h) {
    double x0 = std::max(b.x, 0.0);
    double y0 = std::max(b.y, 0.0);
    double x1 = b.x + b.w;
    double y1 = b.y + b.h;
    if (image_w > 0) x1 = std::min(x1, image_w);
    if (image_h > 0) y1 = std::min(y1, image_h);
    if (x1 <= x0 || y1 <= y0) return false;
    b.x = x0;
    b.y = y0;
    b.w = x1 - x0;
    b.h = y1 - y0;
    return true;
}

} // namespace

std::map<std::string, DetectionSet> load_detections(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(ErrorCode::io, "cannot open detections file: " + path);

    struct RawBox {
        std::string kind;
        BoundingBox box;
    };
    std::map<std::string, DetectionSet> sets;
    std::vector<std::pair<std::string, RawBox>> raw;
    std::map<std::string, std::uint32_t> next_index; // detection lines per image, file order

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto fields = split_fields(line);
        if (fields.empty() || fields[0].starts_with("#")) continue;
        if (fields.size() != 8)
            raise(ErrorCode::parse, path + ":" + std::to_string(line_no) +
                                        ": expected 8 fields, got " +
                                        std::to_string(fields.size()));
        std::string image_id(fields[0]);
        std::string kind(fields[1]);
        BoundingBox b;
        b.class_label = std::string(fields[2]);
        if (!parse_double_field(fields[3], b.confidence) || !parse_double_field(fields[4], b.x) ||
            !parse_double_field(fields[5], b.y) || !parse_double_field(fields[6], b.w) ||
            !parse_double_field(fields[7], b.h))
            raise(ErrorCode::parse,
                  path + ":" + std::to_string(line_no) + ": non-numeric box field");
        if (b.confidence < 0.0 || b.confidence > 1.0)
            raise(ErrorCode::parse, path + ":" + std::to_string(line_no) +
                                        ": confidence outside [0, 1]");

        DetectionSet& set = sets[image_id];
        set.image_id = image_id;
        if (kind == "image") {
            set.image_w = b.w;
            set.image_h = b.h;
        } else if (kind == "person" || kind == "object") {
            b.det_index = next_index[image_id]++;
            raw.emplace_back(std::move(image_id), RawBox{std::move(kind), std::move(b)});
        } else {
            raise(ErrorCode::parse, path + ":" + std::to_string(line_no) +
                                        ": unknown detection kind '" + kind + "'");
        }
    }

    for (auto& [image_id, rb] : raw) {
        DetectionSet& set = sets[image_id];
        if (!clip_box(rb.box, set.image_w, set.image_h)) {
            ++set.dropped_degenerate;
            continue;
        }
        if (rb.kind == "person")
            set.persons.push_back(std::move(rb.box));
        else
            set.objects.push_back(std::move(rb.box));
    }
    return sets;
}

} // namespace cuerank
