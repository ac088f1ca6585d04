#include "cuerank/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace cuerank {

namespace {

struct TypeName {
    QuestionType type;
    const char* name;
    QuestionGroup group;
};

constexpr TypeName kTypeNames[kQuestionTypeCount] = {
    {QuestionType::Scene, "Scene", QuestionGroup::whole_image},
    {QuestionType::Emotion, "Emotion", QuestionGroup::whole_image},
    {QuestionType::Interesting, "Interesting", QuestionGroup::whole_image},
    {QuestionType::Past, "Past", QuestionGroup::whole_image},
    {QuestionType::Future, "Future", QuestionGroup::whole_image},
    {QuestionType::PersonAttribute, "PersonAttribute", QuestionGroup::person},
    {QuestionType::PersonAction, "PersonAction", QuestionGroup::person},
    {QuestionType::PersonLocation, "PersonLocation", QuestionGroup::person},
    {QuestionType::PersonObjectRelation, "PersonObjectRelation", QuestionGroup::person},
    {QuestionType::ObjectAttribute, "ObjectAttribute", QuestionGroup::object},
    {QuestionType::ObjectAffordance, "ObjectAffordance", QuestionGroup::object},
    {QuestionType::ObjectLocation, "ObjectLocation", QuestionGroup::object},
};

} // namespace

QuestionGroup group_of(QuestionType type) { return kTypeNames[static_cast<int>(type)].group; }

std::string to_string(QuestionType type) { return kTypeNames[static_cast<int>(type)].name; }

std::string to_string(Difficulty difficulty) {
    return difficulty == Difficulty::easy ? "easy" : "hard";
}

std::string to_string(QuestionGroup group) {
    switch (group) {
        case QuestionGroup::whole_image: return "a";
        case QuestionGroup::person: return "b";
        case QuestionGroup::object: return "c";
    }
    return "?";
}

QuestionType question_type_from_string(std::string_view name) {
    for (const TypeName& tn : kTypeNames)
        if (name == tn.name) return tn.type;
    raise(ErrorCode::parse, "unknown question type: " + std::string(name));
}

Difficulty difficulty_from_string(std::string_view name) {
    if (name == "easy") return Difficulty::easy;
    if (name == "hard") return Difficulty::hard;
    raise(ErrorCode::parse, "unknown difficulty: " + std::string(name));
}

std::string Question::image_id() const {
    const std::size_t hash = id.find('#');
    return hash == std::string::npos ? id : id.substr(0, hash);
}

void Question::validate() const {
    if (id.empty()) raise(ErrorCode::invalid_argument, "question with empty id");
    if (correct < 0 || correct > 3)
        raise(ErrorCode::invalid_argument, "question '" + id + "': correct index out of range");
    for (const std::string& c : choices)
        if (c.empty())
            raise(ErrorCode::invalid_argument, "question '" + id + "': empty answer choice");
    const bool needs_box = group_of(qtype) != QuestionGroup::whole_image;
    if (needs_box && !focus_box)
        raise(ErrorCode::invalid_argument,
              "question '" + id + "': " + to_string(qtype) + " requires a focus box");
    if (!needs_box && focus_box)
        raise(ErrorCode::invalid_argument,
              "question '" + id + "': " + to_string(qtype) + " must not carry a focus box");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return fields;
}

BoundingBox parse_focus_box(const std::string& text, const std::string& where) {
    std::array<double, 4> v{};
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
        std::size_t comma = text.find(',', start);
        std::string field = text.substr(start, comma - start);
        auto res = std::from_chars(field.data(), field.data() + field.size(), v[static_cast<std::size_t>(i)]);
        if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
            raise(ErrorCode::parse, where + ": bad focus box '" + text + "'");
        if (comma == std::string::npos) {
            if (i != 3) raise(ErrorCode::parse, where + ": focus box needs x,y,w,h");
            break;
        }
        start = comma + 1;
    }
    BoundingBox box;
    box.x = v[0];
    box.y = v[1];
    box.w = v[2];
    box.h = v[3];
    box.confidence = 1.0;
    box.class_label = "gt";
    if (box.w <= 0 || box.h <= 0) raise(ErrorCode::parse, where + ": degenerate focus box");
    return box;
}

} // namespace

std::vector<Question> load_questions(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(ErrorCode::io, "cannot open questions file: " + path);
    std::vector<Question> questions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(line_no);
        auto fields = split_tabs(line);
        if (fields.size() != 9 && fields.size() != 10)
            raise(ErrorCode::parse,
                  where + ": expected 9 or 10 tab-separated fields, got " +
                      std::to_string(fields.size()));
        Question q;
        q.id = fields[0];
        q.qtype = question_type_from_string(fields[1]);
        q.difficulty = difficulty_from_string(fields[2]);
        q.prompt = fields[3];
        for (int i = 0; i < 4; ++i) q.choices[static_cast<std::size_t>(i)] = fields[static_cast<std::size_t>(4 + i)];
        int correct = -1;
        auto res = std::from_chars(fields[8].data(), fields[8].data() + fields[8].size(), correct);
        if (res.ec != std::errc{} || res.ptr != fields[8].data() + fields[8].size())
            raise(ErrorCode::parse, where + ": bad correct index '" + fields[8] + "'");
        q.correct = correct;
        if (fields.size() == 10 && !fields[9].empty())
            q.focus_box = parse_focus_box(fields[9], where);
        try {
            q.validate();
        } catch (const Error& e) {
            raise(ErrorCode::parse, where + ": " + e.what());
        }
        questions.push_back(std::move(q));
    }
    return questions;
}

void write_questions(const std::string& path, const std::vector<Question>& questions) {
    std::ofstream os(path);
    if (!os) raise(ErrorCode::io, "cannot open questions file for writing: " + path);
    char buf[128];
    for (const Question& q : questions) {
        os << q.id << '\t' << to_string(q.qtype) << '\t' << to_string(q.difficulty) << '\t'
           << q.prompt;
        for (const std::string& c : q.choices) os << '\t' << c;
        os << '\t' << q.correct;
        if (q.focus_box) {
            std::snprintf(buf, sizeof(buf), "%g,%g,%g,%g", q.focus_box->x, q.focus_box->y,
                          q.focus_box->w, q.focus_box->h);
            os << '\t' << buf;
        }
        os << '\n';
    }
    if (!os) raise(ErrorCode::io, "failed writing questions file: " + path);
}

AccuracyCell& AccuracyTable::cell(QuestionType t, Difficulty d, const std::string& config) {
    return cells[{static_cast<int>(t), static_cast<int>(d), config}];
}

const AccuracyCell* AccuracyTable::find(QuestionType t, Difficulty d,
                                        const std::string& config) const {
    auto it = cells.find({static_cast<int>(t), static_cast<int>(d), config});
    return it == cells.end() ? nullptr : &it->second;
}

AccuracyCell AccuracyTable::overall(const std::string& config) const {
    AccuracyCell sum;
    for (const auto& [key, cell] : cells) {
        if (std::get<2>(key) != config) continue;
        sum.correct += cell.correct;
        sum.total += cell.total;
        sum.skipped += cell.skipped;
    }
    return sum;
}

namespace {

std::string format_accuracy_cell(const AccuracyCell* cell) {
    if (!cell || (cell->total == 0 && cell->skipped == 0)) return "--";
    char buf[64];
    if (cell->total == 0) {
        std::snprintf(buf, sizeof(buf), "skip=%zu", cell->skipped);
        return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * cell->accuracy());
    std::string out = buf;
    if (cell->skipped > 0) {
        std::snprintf(buf, sizeof(buf), "(s%zu)", cell->skipped);
        out += buf;
    }
    return out;
}

} // namespace

std::string render_table(const AccuracyTable& table, TableFormat format) {
    // Rows present in the table, in canonical type order, easy before hard.
    std::vector<std::pair<QuestionType, Difficulty>> rows;
    for (const TypeName& tn : kTypeNames) {
        for (Difficulty d : {Difficulty::easy, Difficulty::hard}) {
            bool present = false;
            for (const std::string& cfg : table.config_order)
                if (table.find(tn.type, d, cfg)) {
                    present = true;
                    break;
                }
            if (present) rows.emplace_back(tn.type, d);
        }
    }

    std::ostringstream os;
    if (format == TableFormat::csv) {
        os << "group,question_type,difficulty";
        for (const std::string& cfg : table.config_order)
            os << ',' << cfg << "_accuracy," << cfg << "_correct," << cfg << "_total," << cfg
               << "_skipped";
        os << '\n';
        char buf[64];
        for (const auto& [type, diff] : rows) {
            os << to_string(group_of(type)) << ',' << to_string(type) << ',' << to_string(diff);
            for (const std::string& cfg : table.config_order) {
                const AccuracyCell* cell = table.find(type, diff, cfg);
                if (!cell) {
                    os << ",,,,";
                    continue;
                }
                std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * cell->accuracy());
                os << ',' << (cell->total == 0 ? "" : buf) << ',' << cell->correct << ','
                   << cell->total << ',' << cell->skipped;
            }
            os << '\n';
        }
        os << "overall,,";
        for (const std::string& cfg : table.config_order) {
            AccuracyCell sum = table.overall(cfg);
            char abuf[64];
            std::snprintf(abuf, sizeof(abuf), "%.2f", 100.0 * sum.accuracy());
            os << ',' << (sum.total == 0 ? "" : abuf) << ',' << sum.correct << ',' << sum.total
               << ',' << sum.skipped;
        }
        os << '\n';
        return os.str();
    }

    // Text layout: fixed label columns, one column per configuration.
    constexpr int kTypeWidth = 24;
    constexpr int kDiffWidth = 6;
    std::vector<int> widths;
    for (const std::string& cfg : table.config_order)
        widths.push_back(std::max<int>(10, static_cast<int>(cfg.size()) + 2));

    auto pad = [&os](const std::string& s, int width) {
        os << s;
        for (int i = static_cast<int>(s.size()); i < width; ++i) os << ' ';
    };

    pad("group", 7);
    pad("question_type", kTypeWidth);
    pad("diff", kDiffWidth);
    for (std::size_t c = 0; c < table.config_order.size(); ++c)
        pad(table.config_order[c], widths[c]);
    os << '\n';

    QuestionGroup last_group = QuestionGroup::whole_image;
    bool first_row = true;
    for (const auto& [type, diff] : rows) {
        const QuestionGroup group = group_of(type);
        if (first_row || group != last_group) {
            pad(to_string(group) + ")", 7);
            last_group = group;
            first_row = false;
        } else {
            pad("", 7);
        }
        pad(to_string(type), kTypeWidth);
        pad(to_string(diff), kDiffWidth);
        for (std::size_t c = 0; c < table.config_order.size(); ++c)
            pad(format_accuracy_cell(table.find(type, diff, table.config_order[c])), widths[c]);
        os << '\n';
    }

    pad("", 7);
    pad("overall", kTypeWidth);
    pad("", kDiffWidth);
    for (std::size_t c = 0; c < table.config_order.size(); ++c) {
        AccuracyCell sum = table.overall(table.config_order[c]);
        pad(format_accuracy_cell(&sum), widths[c]);
    }
    os << '\n';
    return os.str();
}

std::size_t CueModelSpec::stacked_dim(const CueRegistry& registry) const {
    std::size_t total = 0;
    for (const CuePart& part : parts) total += registry.require(part.cue_kind).declared_dim;
    return total;
}

std::string cue_model_key(QuestionType type, const std::string& cue_name) {
    return to_string(type) + "__" + cue_name;
}

std::map<std::string, CueModelSpec> default_cue_specs() {
    std::map<std::string, CueModelSpec> specs;
    auto add = [&specs](const std::string& name, std::vector<CuePart> parts) {
        specs[name] = CueModelSpec{name, std::move(parts)};
    };
    add("baseline", {{RegionRole::whole, "vgg_fc7"}});
    add("places", {{RegionRole::whole, "vgg_fc7"}, {RegionRole::whole, "places_fc7"}});
    add("person_vgg", {{RegionRole::whole, "vgg_fc7"}, {RegionRole::person, "vgg_fc7"}});
    add("object_vgg", {{RegionRole::whole, "vgg_fc7"}, {RegionRole::object, "vgg_fc7"}});
    add("labelstack", {{RegionRole::person, "act_hico_labels"},
                       {RegionRole::person, "act_mpii_labels"},
                       {RegionRole::person, "attr_labels"}});
    add("color", {{RegionRole::whole, "vgg_fc7"}, {RegionRole::object, "color_fc7"}});
    return specs;
}

std::vector<ScoreConfig> default_score_configs() {
    ScoreConfig cfg;
    cfg.name = "ensemble";
    auto set = [&cfg](QuestionType t, std::vector<std::string> cues, const std::string& preferred,
                      bool person_score) {
        EnsembleConfig e;
        e.question_type = to_string(t);
        e.cues = std::move(cues);
        for (std::size_t i = 0; i < e.cues.size(); ++i)
            if (e.cues[i] == preferred) e.preferred_index = i;
        e.use_person_score = person_score;
        cfg.per_type[t] = std::move(e);
    };
    set(QuestionType::Scene, {"places"}, "places", false);
    set(QuestionType::Emotion, {"places"}, "places", false);
    for (QuestionType t : {QuestionType::Interesting, QuestionType::Past, QuestionType::Future})
        set(t, {"places", "person_vgg", "object_vgg", "labelstack"}, "labelstack", true);
    set(QuestionType::PersonAttribute, {"places", "person_vgg", "labelstack"}, "labelstack", false);
    set(QuestionType::PersonAction, {"places", "person_vgg", "labelstack"}, "labelstack", false);
    set(QuestionType::PersonLocation, {"places", "person_vgg", "labelstack"}, "places", false);
    set(QuestionType::PersonObjectRelation, {"places", "person_vgg", "labelstack"}, "labelstack",
        false);
    set(QuestionType::ObjectAttribute, {"places", "object_vgg", "color"}, "color", false);
    set(QuestionType::ObjectAffordance, {"places", "object_vgg", "color"}, "object_vgg", false);
    set(QuestionType::ObjectLocation, {"places", "object_vgg", "color"}, "places", false);
    return {cfg};
}

// ---------------------------------------------------------------------------
// Feature assembly
// ---------------------------------------------------------------------------

namespace {

struct SelectionPlan {
    // Regions feeding region-role cue parts. Empty = fall back to whole image.
    std::vector<RegionRef> regions;
    // Selection scores per phrase chunk (for the auxiliary person score).
    std::vector<double> scores;
};

} // namespace

FeatureAssembler::AnswerView FeatureAssembler::make_answer_view(
    const std::string& answer_text) const {
    AnswerView view;
    view.tokens = tokenize(answer_text);
    if (view.tokens.empty()) view.tokens.push_back("");
    view.embedding = embed_text(*ctx_.embeddings, view.tokens);
    if (ctx_.person_vocab && ctx_.object_vocab && !ctx_.person_vocab->empty() &&
        !ctx_.object_vocab->empty())
        view.chunks = extract_chunks(view.tokens, *ctx_.person_vocab, *ctx_.object_vocab);
    return view;
}

namespace {

const DetectionSet* find_detections(const EvalContext& ctx, const std::string& image_id) {
    if (!ctx.detections) return nullptr;
    auto it = ctx.detections->find(image_id);
    return it == ctx.detections->end() ? nullptr : &it->second;
}

// Candidate regions for person selection: surviving detections plus the
// union box (feature = mean of surviving members').
std::vector<RegionCandidate> person_candidates(const EvalContext& ctx,
                                               const std::string& image_id,
                                               const std::string& cue_kind) {
    std::vector<RegionCandidate> cands;
    const DetectionSet* dets = find_detections(ctx, image_id);
    if (!dets) return cands;
    std::vector<std::size_t> kept =
        filter_person_indices(dets->persons, ctx.person_conf_threshold, ctx.person_min_side);
    std::vector<const FeatureRecord*> members;
    for (std::size_t i : kept) {
        const std::uint32_t det = dets->persons[i].det_index;
        const FeatureRecord* rec = ctx.store->find(image_id, RegionId::detection(det), cue_kind);
        if (!rec) continue;
        RegionCandidate cand;
        cand.ref = RegionRef{RegionRef::Kind::detection, det};
        cand.feature.assign(rec->vector.begin(), rec->vector.end());
        cand.confidence = dets->persons[i].confidence;
        cands.push_back(std::move(cand));
        members.push_back(rec);
    }
    if (!members.empty()) {
        RegionCandidate uni;
        uni.ref = RegionRef{RegionRef::Kind::union_box, 0};
        uni.feature = pool_regions(members);
        uni.confidence = 0.0;
        cands.push_back(std::move(uni));
    }
    return cands;
}

std::vector<RegionCandidate> object_candidates(const EvalContext& ctx,
                                               const std::string& image_id,
                                               const std::string& cue_kind) {
    std::vector<RegionCandidate> cands;
    const DetectionSet* dets = find_detections(ctx, image_id);
    if (!dets) return cands;
    for (std::size_t i = 0; i < dets->objects.size(); ++i) {
        const std::uint32_t det = dets->objects[i].det_index;
        const FeatureRecord* rec = ctx.store->find(image_id, RegionId::detection(det), cue_kind);
        if (!rec) continue;
        RegionCandidate cand;
        cand.ref = RegionRef{RegionRef::Kind::detection, det};
        cand.feature.assign(rec->vector.begin(), rec->vector.end());
        cand.confidence = dets->objects[i].confidence;
        cands.push_back(std::move(cand));
    }
    // Confidence-descending truncation to the retained candidate set.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const RegionCandidate& a, const RegionCandidate& b) {
                         return a.confidence > b.confidence;
                     });
    if (cands.size() > ctx.object_max_candidates) cands.resize(ctx.object_max_candidates);
    return cands;
}

// Which regions feed person-role parts for this answer, plus per-chunk
// selection scores for the auxiliary person score.
SelectionPlan plan_person_regions(const EvalContext& ctx, const std::string& image_id,
                                  const FeatureAssembler::AnswerView& answer) {
    SelectionPlan plan;
    std::vector<RegionCandidate> cands = person_candidates(ctx, image_id, ctx.person_select_cue);
    std::vector<const PhraseChunk*> person_chunks;
    for (const PhraseChunk& c : answer.chunks)
        if (c.kind == ChunkKind::person) person_chunks.push_back(&c);

    if (cands.empty() || !ctx.person_select) {
        return plan; // whole-image fallback
    }
    if (person_chunks.empty()) {
        // No person mention: all surviving person boxes are selected.
        for (const RegionCandidate& c : cands)
            if (c.ref.kind == RegionRef::Kind::detection) plan.regions.push_back(c.ref);
        return plan;
    }
    for (const PhraseChunk* chunk : person_chunks) {
        EmbedResult phrase = embed_text(*ctx.embeddings, chunk->tokens);
        if (phrase.known_fraction == 0.0) continue;
        SelectionResult sel = select_person_box(*ctx.person_select, cands, phrase.vector, *chunk);
        plan.regions.push_back(sel.chosen);
        plan.scores.push_back(sel.score);
    }
    if (plan.regions.empty()) {
        for (const RegionCandidate& c : cands)
            if (c.ref.kind == RegionRef::Kind::detection) plan.regions.push_back(c.ref);
    }
    return plan;
}

SelectionPlan plan_object_regions(const EvalContext& ctx, const std::string& image_id,
                                  const FeatureAssembler::AnswerView& answer) {
    SelectionPlan plan;
    std::vector<RegionCandidate> cands = object_candidates(ctx, image_id, ctx.object_select_cue);
    std::vector<const PhraseChunk*> object_chunks;
    for (const PhraseChunk& c : answer.chunks)
        if (c.kind == ChunkKind::object) object_chunks.push_back(&c);

    if (cands.empty() || !ctx.object_select) return plan;
    if (object_chunks.empty()) {
        for (const RegionCandidate& c : cands) plan.regions.push_back(c.ref);
        return plan;
    }
    for (const PhraseChunk* chunk : object_chunks) {
        EmbedResult phrase = embed_text(*ctx.embeddings, chunk->tokens);
        if (phrase.known_fraction == 0.0) continue;
        SelectionResult sel = select_object_box(*ctx.object_select, cands, phrase.vector, *chunk,
                                                ctx.object_max_candidates);
        plan.regions.push_back(sel.chosen);
        plan.scores.push_back(sel.score);
    }
    if (plan.regions.empty()) {
        for (const RegionCandidate& c : cands) plan.regions.push_back(c.ref);
    }
    return plan;
}

// Feature vector of `cue_kind` for one selected region reference; detection
// refs read the store, union boxes pool the surviving members.
std::optional<std::vector<double>> region_feature(const EvalContext& ctx,
                                                  const std::string& image_id,
                                                  const RegionRef& ref,
                                                  const std::string& cue_kind, bool person_role,
                                                  std::string* missing_reason) {
    auto missing = [&](const std::string& what) {
        if (missing_reason)
            *missing_reason = "missing feature: image '" + image_id + "', " + what + ", cue " +
                              cue_kind;
        return std::nullopt;
    };
    switch (ref.kind) {
        case RegionRef::Kind::detection: {
            const FeatureRecord* rec =
                ctx.store->find(image_id, RegionId::detection(ref.index), cue_kind);
            if (!rec) return missing("detection " + std::to_string(ref.index));
            return std::vector<double>(rec->vector.begin(), rec->vector.end());
        }
        case RegionRef::Kind::union_box: {
            const DetectionSet* dets = find_detections(ctx, image_id);
            if (!dets) return missing("union box");
            const std::vector<BoundingBox>& boxes = person_role ? dets->persons : dets->objects;
            std::vector<const FeatureRecord*> members;
            std::vector<std::size_t> kept =
                person_role ? filter_person_indices(boxes, ctx.person_conf_threshold,
                                                    ctx.person_min_side)
                            : std::vector<std::size_t>();
            if (!person_role)
                for (std::size_t i = 0; i < boxes.size(); ++i) kept.push_back(i);
            for (std::size_t i : kept) {
                const FeatureRecord* rec =
                    ctx.store->find(image_id, RegionId::detection(boxes[i].det_index), cue_kind);
                if (rec) members.push_back(rec);
            }
            if (members.empty()) return missing("union box members");
            return pool_regions(members);
        }
        case RegionRef::Kind::whole_image: {
            const FeatureRecord* rec = ctx.store->find(image_id, RegionId::whole_image(), cue_kind);
            if (!rec) return missing("whole image");
            return std::vector<double>(rec->vector.begin(), rec->vector.end());
        }
    }
    return missing("region");
}

} // namespace

std::optional<std::vector<double>> FeatureAssembler::assemble(const Question& q,
                                                              const CueModelSpec& spec,
                                                              const AnswerView& answer,
                                                              std::string* missing_reason) const {
    const std::string image_id = q.image_id();
    const QuestionGroup group = group_of(q.qtype);

    // Selection plans are computed lazily, at most once per role.
    std::optional<SelectionPlan> person_plan, object_plan;

    std::vector<double> stacked;
    for (const CuePart& part : spec.parts) {
        const CueKind& kind = ctx_.registry->require(part.cue_kind);
        std::optional<std::vector<double>> vec;

        if (part.role == RegionRole::whole) {
            vec = region_feature(ctx_, image_id, RegionRef{RegionRef::Kind::whole_image, 0},
                                 kind.name, false, missing_reason);
        } else if (part.role == RegionRole::person && group == QuestionGroup::person &&
                   q.focus_box) {
            const FeatureRecord* rec = ctx_.store->find(image_id, RegionId::gt_box(), kind.name);
            if (rec)
                vec = std::vector<double>(rec->vector.begin(), rec->vector.end());
            else if (missing_reason)
                *missing_reason =
                    "missing feature: image '" + image_id + "', gt_box, cue " + kind.name;
        } else if (part.role == RegionRole::object && group == QuestionGroup::object &&
                   q.focus_box) {
            const FeatureRecord* rec = ctx_.store->find(image_id, RegionId::gt_box(), kind.name);
            if (rec)
                vec = std::vector<double>(rec->vector.begin(), rec->vector.end());
            else if (missing_reason)
                *missing_reason =
                    "missing feature: image '" + image_id + "', gt_box, cue " + kind.name;
        } else {
            // Region selection path.
            const bool person_role = part.role == RegionRole::person;
            SelectionPlan& plan = [&]() -> SelectionPlan& {
                if (person_role) {
                    if (!person_plan) person_plan = plan_person_regions(ctx_, image_id, answer);
                    return *person_plan;
                }
                if (!object_plan) object_plan = plan_object_regions(ctx_, image_id, answer);
                return *object_plan;
            }();
            if (plan.regions.empty()) {
                // No usable detections: whole-image fallback.
                vec = region_feature(ctx_, image_id, RegionRef{RegionRef::Kind::whole_image, 0},
                                     kind.name, person_role, missing_reason);
            } else {
                // Mean over the selected regions' features.
                std::vector<double> pooled;
                bool ok = true;
                for (const RegionRef& ref : plan.regions) {
                    auto f =
                        region_feature(ctx_, image_id, ref, kind.name, person_role, missing_reason);
                    if (!f) {
                        ok = false;
                        break;
                    }
                    if (pooled.empty()) pooled.assign(f->size(), 0.0);
                    for (std::size_t j = 0; j < f->size(); ++j) pooled[j] += (*f)[j];
                }
                if (ok) {
                    const double inv = 1.0 / static_cast<double>(plan.regions.size());
                    for (double& v : pooled) v *= inv;
                    vec = std::move(pooled);
                }
            }
        }

        if (!vec) return std::nullopt;
        if (vec->size() != kind.declared_dim)
            raise(ErrorCode::internal, "assembled part has wrong dimension for cue " + kind.name);
        stacked.insert(stacked.end(), vec->begin(), vec->end());
    }
    return stacked;
}

double FeatureAssembler::person_score(const Question& q, const AnswerView& answer) const {
    if (!ctx_.person_select) return 0.0;
    const std::string image_id = q.image_id();
    SelectionPlan plan = plan_person_regions(ctx_, image_id, answer);
    if (!plan.scores.empty()) {
        double sum = 0.0;
        for (double s : plan.scores) sum += s;
        return sum / static_cast<double>(plan.scores.size());
    }
    // No person mention: score the pooled surviving boxes (or the whole
    // image) against the full answer embedding.
    if (answer.embedding.known_fraction == 0.0) return 0.0;
    std::vector<RegionCandidate> cands =
        person_candidates(ctx_, image_id, ctx_.person_select_cue);
    std::vector<double> feature;
    if (!cands.empty()) {
        // The last candidate is the union of the surviving boxes.
        feature = cands.back().feature;
    } else {
        const FeatureRecord* rec =
            ctx_.store->find(image_id, RegionId::whole_image(), ctx_.person_select_cue);
        if (!rec) return 0.0;
        feature.assign(rec->vector.begin(), rec->vector.end());
    }
    return similarity(*ctx_.person_select, feature, answer.embedding.vector);
}

double FeatureAssembler::object_score(const Question& q, const AnswerView& answer) const {
    if (!ctx_.object_select) return 0.0;
    std::vector<const PhraseChunk*> object_chunks;
    for (const PhraseChunk& c : answer.chunks)
        if (c.kind == ChunkKind::object) object_chunks.push_back(&c);
    if (object_chunks.empty()) return 0.0; // no object mention to match

    std::vector<RegionCandidate> cands =
        object_candidates(ctx_, q.image_id(), ctx_.object_select_cue);
    if (cands.empty()) return 0.0;

    DenseMatrix cosines(cands.size(), object_chunks.size());
    std::size_t col = 0;
    for (const PhraseChunk* chunk : object_chunks) {
        EmbedResult phrase = embed_text(*ctx_.embeddings, chunk->tokens);
        for (std::size_t row = 0; row < cands.size(); ++row) {
            cosines.at(row, col) = phrase.known_fraction == 0.0
                                       ? 0.0
                                       : similarity(*ctx_.object_select, cands[row].feature,
                                                    phrase.vector);
        }
        ++col;
    }
    return kernel_score(cosines, ctx_.kernel_p);
}

// ---------------------------------------------------------------------------
// Model fitting
// ---------------------------------------------------------------------------

CcaModel fit_selection_model(const std::vector<SelectionPair>& pairs,
                             const EmbeddingTable& embeddings, const CcaConfig& config) {
    if (pairs.empty()) raise(ErrorCode::missing_data, "no selection pairs to fit on");
    const std::size_t dim = pairs.front().feature.size();
    DenseMatrix x(pairs.size(), dim);
    DenseMatrix y(pairs.size(), embeddings.dimension);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].feature.size() != dim)
            raise(ErrorCode::dimension_mismatch, "selection pairs have mixed dimensions");
        for (std::size_t j = 0; j < dim; ++j) x.at(i, j) = pairs[i].feature[j];
        EmbedResult e = embed_text(embeddings, tokenize(pairs[i].phrase));
        if (e.known_fraction == 0.0)
            raise(ErrorCode::missing_data,
                  "selection phrase has no known tokens: '" + pairs[i].phrase + "'");
        for (std::size_t j = 0; j < embeddings.dimension; ++j) y.at(i, j) = e.vector[j];
    }
    return fit_cca(x, y, config);
}

std::map<std::string, CcaModel> fit_cue_models(const std::vector<Question>& train,
                                               const EvalContext& ctx,
                                               const std::vector<ScoreConfig>& configs,
                                               const CcaConfig& cca_default,
                                               const std::map<std::string, CcaConfig>& overrides,
                                               std::vector<FitReport>* reports) {
    if (!ctx.registry || !ctx.store || !ctx.embeddings || !ctx.cue_specs)
        raise(ErrorCode::invalid_argument, "fit_cue_models: incomplete context");

    std::set<QuestionType> present;
    for (const Question& q : train) present.insert(q.qtype);
    std::set<std::pair<QuestionType, std::string>> needed;
    for (const ScoreConfig& sc : configs)
        for (const auto& [t, e] : sc.per_type) {
            if (!present.count(t)) continue;
            for (const std::string& cue : e.cues) {
                if (!ctx.cue_specs->count(cue))
                    raise(ErrorCode::config, "configuration '" + sc.name +
                                                 "' references unknown cue model '" + cue + "'");
                needed.emplace(t, cue);
            }
        }

    std::map<QuestionType, std::vector<const Question*>> by_type;
    for (const Question& q : train) by_type[q.qtype].push_back(&q);

    FeatureAssembler assembler(ctx);
    std::map<std::string, CcaModel> models;
    for (const auto& [qtype, cue_name] : needed) {
        const CueModelSpec& spec = ctx.cue_specs->at(cue_name);
        const std::size_t dim = spec.stacked_dim(*ctx.registry);
        std::vector<std::vector<double>> xs, ys;
        std::size_t skipped = 0;
        for (const Question* q : by_type[qtype]) {
            const std::string& answer = q->choices[static_cast<std::size_t>(q->correct)];
            FeatureAssembler::AnswerView view = assembler.make_answer_view(answer);
            if (view.embedding.known_fraction == 0.0) {
                ++skipped;
                continue;
            }
            std::string reason;
            auto visual = assembler.assemble(*q, spec, view, &reason);
            if (!visual) {
                ++skipped;
                continue;
            }
            xs.push_back(std::move(*visual));
            ys.push_back(view.embedding.vector);
        }
        const std::string key = cue_model_key(qtype, cue_name);
        if (xs.size() < 2)
            raise(ErrorCode::missing_data,
                  "not enough usable training questions for " + key + " (" +
                      std::to_string(xs.size()) + " usable, " + std::to_string(skipped) +
                      " skipped)");
        DenseMatrix x(xs.size(), dim);
        DenseMatrix y(ys.size(), ctx.embeddings->dimension);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            std::copy(xs[i].begin(), xs[i].end(),
                      x.values.begin() + static_cast<std::ptrdiff_t>(i * dim));
            std::copy(ys[i].begin(), ys[i].end(),
                      y.values.begin() +
                          static_cast<std::ptrdiff_t>(i * ctx.embeddings->dimension));
        }
        CcaConfig cfg = cca_default;
        auto ov = overrides.find(cue_name);
        if (ov != overrides.end()) cfg = ov->second;
        CcaModel model = fit_cca(x, y, cfg);
        if (reports) {
            FitReport rep;
            rep.key = key;
            rep.used = xs.size();
            rep.skipped = skipped;
            rep.dim_x = model.dim_x();
            rep.dim_y = model.dim_y();
            rep.components = model.components();
            const std::size_t top = std::min<std::size_t>(5, model.correlations.size());
            rep.top_correlations.assign(model.correlations.begin(),
                                        model.correlations.begin() +
                                            static_cast<std::ptrdiff_t>(top));
            reports->push_back(std::move(rep));
        }
        models.emplace(key, std::move(model));
    }
    return models;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

struct ConfigOutcome {
    bool applicable = false;
    bool skipped = false;
    std::string skip_reason;
    bool correct = false;
    QuestionScore audit;
};

struct QuestionOutcome {
    std::vector<ConfigOutcome> per_config;
};

QuestionOutcome evaluate_one(const Question& q, const EvalContext& ctx,
                             const std::vector<ScoreConfig>& configs, bool want_audit) {
    QuestionOutcome outcome;
    outcome.per_config.resize(configs.size());

    FeatureAssembler assembler(ctx);
    std::array<FeatureAssembler::AnswerView, 4> answers;
    for (std::size_t a = 0; a < 4; ++a)
        answers[a] = assembler.make_answer_view(q.choices[a]);

    // Cue scores shared across configurations; nullopt marks missing data.
    std::map<std::string, std::optional<std::array<double, 4>>> cue_scores;
    std::map<std::string, std::string> cue_missing;

    auto cue_score_row = [&](const std::string& cue_name)
        -> const std::optional<std::array<double, 4>>& {
        auto it = cue_scores.find(cue_name);
        if (it != cue_scores.end()) return it->second;
        const CueModelSpec& spec = ctx.cue_specs->at(cue_name);
        auto model_it = ctx.cue_models->find(cue_model_key(q.qtype, cue_name));
        if (model_it == ctx.cue_models->end())
            raise(ErrorCode::missing_data, "no fitted model for " +
                                               cue_model_key(q.qtype, cue_name));
        const CcaModel& model = model_it->second;
        std::array<double, 4> row{};
        std::optional<std::array<double, 4>> result = row;
        for (std::size_t a = 0; a < 4; ++a) {
            if (answers[a].embedding.known_fraction == 0.0) {
                (*result)[a] = 0.0; // all-unknown answers score 0 by definition
                continue;
            }
            std::string reason;
            auto visual = assembler.assemble(q, spec, answers[a], &reason);
            if (!visual) {
                cue_missing[cue_name] = reason;
                result = std::nullopt;
                break;
            }
            (*result)[a] = similarity(model, *visual, answers[a].embedding.vector);
        }
        return cue_scores.emplace(cue_name, std::move(result)).first->second;
    };

    // Auxiliary scores are configuration-independent; computed lazily once.
    std::optional<std::array<double, 4>> person_aux, object_aux;
    auto person_aux_scores = [&]() -> const std::array<double, 4>& {
        if (!person_aux) {
            std::array<double, 4> s{};
            for (std::size_t a = 0; a < 4; ++a) s[a] = assembler.person_score(q, answers[a]);
            person_aux = s;
        }
        return *person_aux;
    };
    auto object_aux_scores = [&]() -> const std::array<double, 4>& {
        if (!object_aux) {
            std::array<double, 4> s{};
            for (std::size_t a = 0; a < 4; ++a) s[a] = assembler.object_score(q, answers[a]);
            object_aux = s;
        }
        return *object_aux;
    };

    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        ConfigOutcome& out = outcome.per_config[ci];
        auto type_it = configs[ci].per_type.find(q.qtype);
        if (type_it == configs[ci].per_type.end()) continue; // config does not cover this type
        out.applicable = true;
        const EnsembleConfig& ensemble = type_it->second;

        DenseMatrix per_cue(ensemble.cues.size(), 4);
        bool missing = false;
        for (std::size_t c = 0; c < ensemble.cues.size(); ++c) {
            const auto& row = cue_score_row(ensemble.cues[c]);
            if (!row) {
                out.skipped = true;
                out.skip_reason = cue_missing[ensemble.cues[c]];
                missing = true;
                break;
            }
            for (std::size_t a = 0; a < 4; ++a) per_cue.at(c, a) = (*row)[a];
        }

        if (!missing) {
            DenseMatrix scores = per_cue;
            if (configs[ci].zscore) {
                for (std::size_t c = 0; c < scores.rows; ++c) {
                    double mean = 0.0;
                    for (std::size_t a = 0; a < 4; ++a) mean += scores.at(c, a);
                    mean /= 4.0;
                    double var = 0.0;
                    for (std::size_t a = 0; a < 4; ++a) {
                        const double d = scores.at(c, a) - mean;
                        var += d * d;
                    }
                    const double sd = std::sqrt(var / 4.0);
                    for (std::size_t a = 0; a < 4; ++a)
                        scores.at(c, a) = sd < 1e-15 ? 0.0 : (scores.at(c, a) - mean) / sd;
                }
            }
            std::array<double, 4> combined = combine_scores(scores, ensemble.weights());
            if (ensemble.use_person_score) combined = attach_auxiliary(combined, person_aux_scores());
            if (ensemble.use_object_score) combined = attach_auxiliary(combined, object_aux_scores());
            const std::size_t chosen = choose_answer(combined);
            out.correct = static_cast<int>(chosen) == q.correct;

            if (want_audit) {
                out.audit.per_cue = per_cue;
                out.audit.combined = combined;
                out.audit.chosen = chosen;
            }
        }
        if (want_audit) {
            out.audit.question_id = q.id;
            out.audit.qtype = q.qtype;
            out.audit.difficulty = q.difficulty;
            out.audit.config = configs[ci].name;
            out.audit.skipped = out.skipped;
            out.audit.skip_reason = out.skip_reason;
            out.audit.cue_names = ensemble.cues;
            out.audit.correct_answer = q.correct;
            out.audit.correct = out.correct;
        }
    }
    return outcome;
}

} // namespace

AccuracyTable evaluate(const std::vector<Question>& questions, const EvalContext& ctx,
                       const std::vector<ScoreConfig>& configs,
                       std::vector<QuestionScore>* audit) {
    if (!ctx.registry || !ctx.store || !ctx.embeddings || !ctx.cue_models || !ctx.cue_specs)
        raise(ErrorCode::invalid_argument, "evaluate: incomplete context");
    for (const ScoreConfig& cfg : configs)
        for (const auto& [type, ensemble] : cfg.per_type) ensemble.validate();

    // Hard error up front for any (question type, cue) pair without a model.
    std::set<std::string> needed;
    for (const Question& q : questions)
        for (const ScoreConfig& cfg : configs) {
            auto it = cfg.per_type.find(q.qtype);
            if (it == cfg.per_type.end()) continue;
            for (const std::string& cue : it->second.cues) {
                if (!ctx.cue_specs->count(cue))
                    raise(ErrorCode::config, "configuration '" + cfg.name +
                                                 "' references unknown cue model '" + cue + "'");
                needed.insert(cue_model_key(q.qtype, cue));
            }
        }
    for (const std::string& key : needed)
        if (!ctx.cue_models->count(key))
            raise(ErrorCode::missing_data, "no fitted model for " + key);

    const bool want_audit = audit != nullptr;
    std::vector<QuestionOutcome> outcomes(questions.size());

    const int threads = std::max(1, ctx.threads);
    if (threads == 1 || questions.size() < 2) {
        for (std::size_t i = 0; i < questions.size(); ++i)
            outcomes[i] = evaluate_one(questions[i], ctx, configs, want_audit);
    } else {
        std::vector<std::thread> pool;
        std::size_t used = std::min<std::size_t>(static_cast<std::size_t>(threads), questions.size());
        for (std::size_t t = 0; t < used; ++t) {
            pool.emplace_back([&, t]() {
                for (std::size_t i = t; i < questions.size(); i += used)
                    outcomes[i] = evaluate_one(questions[i], ctx, configs, want_audit);
            });
        }
        for (std::thread& th : pool) th.join();
    }

    AccuracyTable table;
    for (const ScoreConfig& cfg : configs) table.config_order.push_back(cfg.name);
    for (std::size_t i = 0; i < questions.size(); ++i) {
        const Question& q = questions[i];
        for (std::size_t ci = 0; ci < configs.size(); ++ci) {
            const ConfigOutcome& out = outcomes[i].per_config[ci];
            if (!out.applicable) continue;
            AccuracyCell& cell = table.cell(q.qtype, q.difficulty, configs[ci].name);
            if (out.skipped) {
                ++cell.skipped;
            } else {
                ++cell.total;
                if (out.correct) ++cell.correct;
            }
            if (audit) audit->push_back(outcomes[i].per_config[ci].audit);
        }
    }
    return table;
}

} // namespace cuerank
