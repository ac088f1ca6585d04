#include "cuerank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cuerank {

std::uint64_t SyntheticRng::next_u64() {
    state_ += 0x9E3779B97f4A7C15ull;
    std::uint64_t z = state_;
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

double SyntheticRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SyntheticRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t SyntheticRng::uniform_index(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

DistractorMode distractor_mode_from_string(std::string_view name) {
    if (name == "independent") return DistractorMode::independent;
    if (name == "near_miss") return DistractorMode::near_miss;
    raise(ErrorCode::parse, "unknown distractor mode: " + std::string(name));
}

std::string to_string(DistractorMode mode) {
    return mode == DistractorMode::independent ? "independent" : "near_miss";
}

void SyntheticSpec::validate() const {
    if (n_train == 0 || n_test == 0)
        raise(ErrorCode::invalid_argument, "synthetic spec: question counts must be positive");
    if (latent_dim == 0)
        raise(ErrorCode::invalid_argument, "synthetic spec: latent_dim must be positive");
    if (!(signal_correlation > 0.0 && signal_correlation < 1.0))
        raise(ErrorCode::invalid_argument,
              "synthetic spec: signal_correlation must lie strictly inside (0, 1)");
    if (!(noise_scale > 0.0))
        raise(ErrorCode::invalid_argument, "synthetic spec: noise_scale must be positive");
    if (!(near_miss_alpha > 0.0 && near_miss_alpha < 1.0))
        raise(ErrorCode::invalid_argument, "synthetic spec: near_miss_alpha must be in (0, 1)");
    if (embedding_dim == 0 || person_detections == 0 || object_detections == 0 ||
        selection_pairs == 0)
        raise(ErrorCode::invalid_argument, "synthetic spec: counts must be positive");
    for (const SyntheticCueSpec& cue : cues) {
        if (cue.name.empty() || cue.dim == 0)
            raise(ErrorCode::invalid_argument, "synthetic spec: cue needs a name and dimension");
        if (cue.signal < 0.0)
            raise(ErrorCode::invalid_argument, "synthetic spec: cue signal must be >= 0");
        const std::size_t end = cue.latent_end == 0 ? latent_dim : cue.latent_end;
        if (cue.latent_begin >= end || end > latent_dim)
            raise(ErrorCode::invalid_argument,
                  "synthetic spec: cue '" + cue.name + "' has a bad latent slice");
    }
}

namespace {

constexpr std::size_t kSelectionDim = 48;
constexpr double kLatentTokenGain = 3.0;
constexpr double kLatentTokenNoise = 0.1;
constexpr double kSelectionNoise = 0.5;
constexpr double kImageW = 640.0;
constexpr double kImageH = 480.0;

const char* const kPersonLabels[] = {"girl",  "boy",    "man",        "woman", "child",
                                     "rider", "worker", "young girl", "old man"};
const char* const kObjectLabels[] = {"dog",  "car",  "ball", "table", "bike",
                                     "horse", "cup", "tree", "fire hydrant"};
const char* const kFillerWords[] = {"the", "a", "is", "and", "was", "will"};

std::vector<double> randn_vec(SyntheticRng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

void normalize(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    for (double& x : v) x /= norm;
}

// rows x cols map with standard-normal entries; unit-norm inputs yield
// roughly unit-variance output components.
struct LinearMap {
    std::size_t rows = 0, cols = 0;
    std::vector<double> w;

    static LinearMap random(SyntheticRng& rng, std::size_t rows, std::size_t cols) {
        LinearMap m;
        m.rows = rows;
        m.cols = cols;
        m.w = randn_vec(rng, rows * cols);
        return m;
    }

    std::vector<double> apply(const std::vector<double>& in) const {
        std::vector<double> out(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = w.data() + r * cols;
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc += row[c] * in[c];
            out[r] = acc;
        }
        return out;
    }
};

std::vector<std::string> label_strings(const char* const* begin, std::size_t count) {
    return std::vector<std::string>(begin, begin + count);
}

struct GenState {
    const SyntheticSpec& spec;
    SyntheticRng rng;
    SyntheticDataset& data;
    std::vector<SyntheticCueSpec> cues;
    std::map<std::string, LinearMap> cue_maps; // cue name -> latent-slice map
    LinearMap text_map;                        // latent -> embedding space
    LinearMap person_sel_map;                  // embedding -> selection feature
    LinearMap object_sel_map;
    std::vector<std::string> person_labels;
    std::vector<std::string> object_labels;

    GenState(const SyntheticSpec& s, SyntheticDataset& d)
        : spec(s), rng(s.seed), data(d) {}
};

std::vector<double> slice_unit_latent(const std::vector<double>& latent,
                                      const SyntheticCueSpec& cue, std::size_t latent_dim) {
    const std::size_t end = cue.latent_end == 0 ? latent_dim : cue.latent_end;
    std::vector<double> slice(latent.begin() + static_cast<std::ptrdiff_t>(cue.latent_begin),
                              latent.begin() + static_cast<std::ptrdiff_t>(end));
    normalize(slice);
    return slice;
}

std::vector<float> cue_feature(GenState& g, const SyntheticCueSpec& cue,
                               const std::vector<double>& latent) {
    const LinearMap& map = g.cue_maps.at(cue.name);
    std::vector<double> mapped = map.apply(slice_unit_latent(latent, cue, g.spec.latent_dim));
    const double s = g.spec.signal_correlation * cue.signal;
    std::vector<float> out(cue.dim);
    for (std::size_t j = 0; j < cue.dim; ++j)
        out[j] = static_cast<float>(s * mapped[j] + g.spec.noise_scale * g.rng.normal());
    return out;
}

void add_embedding(GenState& g, const std::string& token, std::vector<double> vec) {
    g.data.embeddings.entries.emplace(token, std::move(vec));
}

std::vector<double> vocab_token_vec(GenState& g) {
    std::vector<double> v = randn_vec(g.rng, g.spec.embedding_dim);
    const double inv = 1.0 / std::sqrt(static_cast<double>(g.spec.embedding_dim));
    for (double& x : v) x *= inv;
    return v;
}

// Mean of the label's token embeddings, unit-normalized; what embed_text
// produces for the phrase, up to scale.
std::vector<double> label_embedding(GenState& g, const std::string& label) {
    std::vector<std::string> tokens = tokenize(label);
    EmbedResult e = embed_text(g.data.embeddings, tokens);
    normalize(e.vector);
    return e.vector;
}

std::vector<float> selection_feature(GenState& g, const LinearMap& map,
                                     const std::vector<double>& phrase_unit) {
    std::vector<double> mapped = map.apply(phrase_unit);
    std::vector<float> out(map.rows);
    for (std::size_t j = 0; j < map.rows; ++j)
        out[j] = static_cast<float>(mapped[j] + kSelectionNoise * g.rng.normal());
    return out;
}

void insert_record(GenState& g, const std::string& image_id, RegionId region,
                   const std::string& cue_name, std::vector<float> vec) {
    FeatureRecord rec;
    rec.image_id = image_id;
    rec.region = region;
    rec.cue = cue_name;
    rec.vector = std::move(vec);
    g.data.store.insert(std::move(rec), g.data.registry.require(cue_name));
}

std::string latent_token_name(const std::string& split, std::size_t index, std::size_t answer) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "t%s%06zua%zu", split.c_str(), index, answer);
    return buf;
}

std::string image_name(const std::string& split, std::size_t index) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s%06zu", split.c_str(), index);
    return buf;
}

bool needs_detections(QuestionType t) {
    return t == QuestionType::Interesting || t == QuestionType::Past || t == QuestionType::Future;
}

std::vector<double> distractor_latent(GenState& g, const std::vector<double>& correct_unit) {
    if (g.spec.distractor_mode == DistractorMode::independent) {
        std::vector<double> z = randn_vec(g.rng, g.spec.latent_dim);
        normalize(z);
        return z;
    }
    const double alpha = g.spec.near_miss_alpha;
    std::vector<double> noise = randn_vec(g.rng, g.spec.latent_dim);
    normalize(noise);
    std::vector<double> z(g.spec.latent_dim);
    const double beta = std::sqrt(1.0 - alpha * alpha);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = alpha * correct_unit[j] + beta * noise[j];
    normalize(z);
    return z;
}

BoundingBox random_box(GenState& g, double min_side, double max_side, double conf_lo,
                       double conf_hi) {
    BoundingBox b;
    b.w = min_side + g.rng.uniform() * (max_side - min_side);
    b.h = min_side + g.rng.uniform() * (max_side - min_side);
    b.x = g.rng.uniform() * (kImageW - max_side - 20.0);
    b.y = g.rng.uniform() * (kImageH - max_side - 20.0);
    b.confidence = conf_lo + g.rng.uniform() * (conf_hi - conf_lo);
    return b;
}

void generate_question(GenState& g, const std::string& split, std::size_t index,
                       QuestionType qtype, std::vector<Question>& sink) {
    const std::string image_id = image_name(split, index);
    Question q;
    q.id = image_id + "#0";
    q.qtype = qtype;
    q.difficulty = g.spec.distractor_mode == DistractorMode::independent ? Difficulty::easy
                                                                         : Difficulty::hard;
    q.prompt = "the blank about this image is ___";
    q.correct = static_cast<int>(g.rng.uniform_index(4));

    std::vector<double> z_img = randn_vec(g.rng, g.spec.latent_dim);
    normalize(z_img);

    const bool with_dets = needs_detections(qtype);
    const std::size_t p_star_idx = g.rng.uniform_index(g.person_labels.size());
    const std::size_t o_star_idx = g.rng.uniform_index(g.object_labels.size());
    const std::string& p_star = g.person_labels[p_star_idx];
    const std::string& o_star = g.object_labels[o_star_idx];

    // Uniform pick excluding one index.
    auto other_index = [&g](std::size_t count, std::size_t excluded) {
        std::size_t idx = g.rng.uniform_index(count - 1);
        return idx == excluded ? count - 1 : idx;
    };

    // Answers: phrase words plus one loud latent-carrying token.
    for (std::size_t a = 0; a < 4; ++a) {
        std::vector<double> z_a =
            static_cast<int>(a) == q.correct ? z_img : distractor_latent(g, z_img);
        const std::string token = latent_token_name(split, index, a);
        std::vector<double> tvec = g.text_map.apply(z_a);
        const double inv = 1.0 / std::sqrt(static_cast<double>(g.spec.embedding_dim));
        for (double& x : tvec) x *= kLatentTokenGain * inv;
        for (double& x : tvec) x += kLatentTokenNoise * inv * g.rng.normal();
        add_embedding(g, token, std::move(tvec));

        std::string text;
        if (with_dets) {
            const bool reuse_words = static_cast<int>(a) == q.correct ||
                                     g.spec.distractor_mode == DistractorMode::near_miss;
            const std::string& wp =
                reuse_words ? p_star : g.person_labels[g.rng.uniform_index(g.person_labels.size())];
            const std::string& wo =
                reuse_words ? o_star : g.object_labels[g.rng.uniform_index(g.object_labels.size())];
            text = "the " + wp + " and the " + wo + " " + token;
        } else {
            text = "is " + token;
        }
        q.choices[a] = text;
    }

    // Whole-image records for whole-role cues.
    for (const SyntheticCueSpec& cue : g.cues)
        if (cue.role == RegionRole::whole)
            insert_record(g, image_id, RegionId::whole_image(), cue.name,
                          cue_feature(g, cue, z_img));

    const QuestionGroup group = group_of(qtype);
    if (group == QuestionGroup::person || group == QuestionGroup::object) {
        BoundingBox focus = random_box(g, 80.0, 180.0, 1.0, 1.0);
        focus.class_label = "gt";
        q.focus_box = focus;
        const RegionRole role =
            group == QuestionGroup::person ? RegionRole::person : RegionRole::object;
        for (const SyntheticCueSpec& cue : g.cues)
            if (cue.role == role)
                insert_record(g, image_id, RegionId::gt_box(), cue.name,
                              cue_feature(g, cue, z_img));
    }

    if (with_dets) {
        DetectionSet set;
        set.image_id = image_id;
        set.image_w = kImageW;
        set.image_h = kImageH;
        std::uint32_t det_index = 0;

        const std::size_t planted_p = g.rng.uniform_index(g.spec.person_detections);
        for (std::size_t i = 0; i < g.spec.person_detections; ++i) {
            BoundingBox b = random_box(g, 60.0, 200.0, 0.82, 0.98);
            b.class_label = "person";
            b.det_index = det_index;
            const bool planted = i == planted_p;
            const std::string& label =
                planted ? p_star
                        : g.person_labels[other_index(g.person_labels.size(), p_star_idx)];
            std::vector<double> label_vec = label_embedding(g, label);
            insert_record(g, image_id, RegionId::detection(det_index), g.data.person_select_cue,
                          selection_feature(g, g.person_sel_map, label_vec));
            std::vector<double> z_box;
            if (planted) {
                z_box = z_img;
            } else {
                z_box = randn_vec(g.rng, g.spec.latent_dim);
                normalize(z_box);
            }
            for (const SyntheticCueSpec& cue : g.cues)
                if (cue.role == RegionRole::person)
                    insert_record(g, image_id, RegionId::detection(det_index), cue.name,
                                  cue_feature(g, cue, z_box));
            if (planted) g.data.planted_person_box[q.id] = det_index;
            set.persons.push_back(b);
            ++det_index;
        }
        // Two person boxes that the 0.8/50 rules must reject.
        {
            BoundingBox low = random_box(g, 60.0, 120.0, 0.3, 0.6);
            low.class_label = "person";
            low.det_index = det_index;
            set.persons.push_back(low);
            ++det_index;
            BoundingBox small = random_box(g, 25.0, 45.0, 0.85, 0.95);
            small.class_label = "person";
            small.det_index = det_index;
            set.persons.push_back(small);
            ++det_index;
        }

        const std::size_t planted_o = g.rng.uniform_index(g.spec.object_detections);
        for (std::size_t i = 0; i < g.spec.object_detections; ++i) {
            BoundingBox b = random_box(g, 40.0, 160.0, 0.5, 0.98);
            b.class_label = "object";
            b.det_index = det_index;
            const bool planted = i == planted_o;
            const std::string& label =
                planted ? o_star
                        : g.object_labels[other_index(g.object_labels.size(), o_star_idx)];
            std::vector<double> label_vec = label_embedding(g, label);
            insert_record(g, image_id, RegionId::detection(det_index), g.data.object_select_cue,
                          selection_feature(g, g.object_sel_map, label_vec));
            std::vector<double> z_box;
            if (planted) {
                z_box = z_img;
            } else {
                z_box = randn_vec(g.rng, g.spec.latent_dim);
                normalize(z_box);
            }
            for (const SyntheticCueSpec& cue : g.cues)
                if (cue.role == RegionRole::object)
                    insert_record(g, image_id, RegionId::detection(det_index), cue.name,
                                  cue_feature(g, cue, z_box));
            if (planted) g.data.planted_object_box[q.id] = det_index;
            set.objects.push_back(b);
            ++det_index;
        }
        g.data.detections.emplace(image_id, std::move(set));
    }

    sink.push_back(std::move(q));
}

} // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticDataset data;
    GenState g(spec, data);

    g.cues = spec.cues;
    if (g.cues.empty()) {
        g.cues = {
            {"syn_scene", 32, RegionRole::whole, 1.0, 0, 0},
            {"syn_global", 32, RegionRole::whole, 1.0, 0, 0},
            {"syn_person", 24, RegionRole::person, 1.0, 0, 0},
            {"syn_object", 24, RegionRole::object, 1.0, 0, 0},
        };
    }

    data.person_select_cue = "syn_attr";
    data.object_select_cue = "syn_objfeat";
    data.registry = CueRegistry::with_standard_kinds();
    for (const SyntheticCueSpec& cue : g.cues) data.registry.register_kind(cue.name, cue.dim);
    data.registry.register_kind(data.person_select_cue, kSelectionDim);
    data.registry.register_kind(data.object_select_cue, kSelectionDim);

    data.embeddings.dimension = spec.embedding_dim;
    g.person_labels = label_strings(kPersonLabels, std::size(kPersonLabels));
    g.object_labels = label_strings(kObjectLabels, std::size(kObjectLabels));

    // Fixed vocabulary and filler embeddings.
    for (const std::string& label : g.person_labels) {
        data.person_vocab.push_back(tokenize(label));
        for (const std::string& tok : tokenize(label))
            if (!data.embeddings.find(tok)) add_embedding(g, tok, vocab_token_vec(g));
    }
    for (const std::string& label : g.object_labels) {
        data.object_vocab.push_back(tokenize(label));
        for (const std::string& tok : tokenize(label))
            if (!data.embeddings.find(tok)) add_embedding(g, tok, vocab_token_vec(g));
    }
    for (const char* word : kFillerWords)
        if (!data.embeddings.find(word)) add_embedding(g, word, vocab_token_vec(g));

    // Latent-to-feature maps, drawn once.
    for (const SyntheticCueSpec& cue : g.cues) {
        const std::size_t end = cue.latent_end == 0 ? spec.latent_dim : cue.latent_end;
        g.cue_maps.emplace(cue.name,
                           LinearMap::random(g.rng, cue.dim, end - cue.latent_begin));
    }
    g.text_map = LinearMap::random(g.rng, spec.embedding_dim, spec.latent_dim);
    g.person_sel_map = LinearMap::random(g.rng, kSelectionDim, spec.embedding_dim);
    g.object_sel_map = LinearMap::random(g.rng, kSelectionDim, spec.embedding_dim);

    // Selection-model training pairs.
    for (std::size_t i = 0; i < spec.selection_pairs; ++i) {
        const std::string& label = g.person_labels[g.rng.uniform_index(g.person_labels.size())];
        SelectionPair pair;
        pair.phrase = label;
        pair.feature = selection_feature(g, g.person_sel_map, label_embedding(g, label));
        data.person_pairs.push_back(std::move(pair));
    }
    for (std::size_t i = 0; i < spec.selection_pairs; ++i) {
        const std::string& label = g.object_labels[g.rng.uniform_index(g.object_labels.size())];
        SelectionPair pair;
        pair.phrase = label;
        pair.feature = selection_feature(g, g.object_sel_map, label_embedding(g, label));
        data.object_pairs.push_back(std::move(pair));
    }

    std::vector<QuestionType> types = spec.question_types;
    if (types.empty())
        types = {QuestionType::Past, QuestionType::PersonAttribute, QuestionType::ObjectAttribute};

    for (std::size_t i = 0; i < spec.n_train; ++i)
        generate_question(g, "tr", i, types[i % types.size()], data.train_questions);
    for (std::size_t i = 0; i < spec.n_test; ++i)
        generate_question(g, "te", i, types[i % types.size()], data.test_questions);

    // Cue-model specs: one per generated cue; region cues are stacked with the
    // first whole cue, mirroring the whole+box stacking of the full pipeline.
    const SyntheticCueSpec* first_whole = nullptr;
    for (const SyntheticCueSpec& cue : g.cues)
        if (cue.role == RegionRole::whole) {
            first_whole = &cue;
            break;
        }
    for (const SyntheticCueSpec& cue : g.cues) {
        CueModelSpec spec_out;
        spec_out.name = cue.name + "_cue";
        if (cue.role == RegionRole::whole) {
            spec_out.parts = {{RegionRole::whole, cue.name}};
        } else {
            if (first_whole) spec_out.parts.push_back({RegionRole::whole, first_whole->name});
            spec_out.parts.push_back({cue.role, cue.name});
        }
        data.cue_specs[spec_out.name] = std::move(spec_out);
    }

    // Per-type rosters: whole cues everywhere, plus the role-matching cues.
    ScoreConfig ensemble;
    ensemble.name = "ensemble";
    for (QuestionType t : types) {
        EnsembleConfig e;
        e.question_type = to_string(t);
        const QuestionGroup group = group_of(t);
        std::string preferred;
        for (const SyntheticCueSpec& cue : g.cues) {
            const bool include =
                cue.role == RegionRole::whole ||
                (cue.role == RegionRole::person &&
                 (group == QuestionGroup::person || needs_detections(t))) ||
                (cue.role == RegionRole::object &&
                 (group == QuestionGroup::object || needs_detections(t)));
            if (!include) continue;
            e.cues.push_back(cue.name + "_cue");
            const bool role_matches =
                (group == QuestionGroup::person && cue.role == RegionRole::person) ||
                (group == QuestionGroup::object && cue.role == RegionRole::object) ||
                (group == QuestionGroup::whole_image && needs_detections(t) &&
                 cue.role == RegionRole::person);
            if (role_matches && preferred.empty()) preferred = cue.name + "_cue";
        }
        if (preferred.empty()) preferred = e.cues.front();
        for (std::size_t i = 0; i < e.cues.size(); ++i)
            if (e.cues[i] == preferred) e.preferred_index = i;
        e.use_person_score = needs_detections(t);
        ensemble.per_type[t] = std::move(e);
    }
    data.score_configs.push_back(ensemble);

    // One single-cue configuration per cue model, over the types whose
    // ensemble roster includes it.
    for (const SyntheticCueSpec& cue : g.cues) {
        ScoreConfig single;
        single.name = "only_" + cue.name;
        const std::string cue_model = cue.name + "_cue";
        for (const auto& [t, e] : ensemble.per_type) {
            if (std::find(e.cues.begin(), e.cues.end(), cue_model) == e.cues.end()) continue;
            EnsembleConfig se;
            se.question_type = to_string(t);
            se.cues = {cue_model};
            se.preferred_index = 0;
            single.per_type[t] = std::move(se);
        }
        if (!single.per_type.empty()) data.score_configs.push_back(std::move(single));
    }

    return data;
}

namespace {

void write_vocab(const std::string& path, const Vocabulary& vocab) {
    std::ofstream os(path);
    if (!os) raise(ErrorCode::io, "cannot write vocabulary file: " + path);
    for (const auto& label : vocab) {
        for (std::size_t i = 0; i < label.size(); ++i) {
            if (i > 0) os << ' ';
            os << label[i];
        }
        os << '\n';
    }
}

void write_embeddings_file(const std::string& path, const EmbeddingTable& table) {
    std::ofstream os(path);
    if (!os) raise(ErrorCode::io, "cannot write embedding file: " + path);
    // Sorted for reproducible files (the table itself is unordered).
    std::vector<const std::string*> tokens;
    tokens.reserve(table.entries.size());
    for (const auto& [tok, vec] : table.entries) tokens.push_back(&tok);
    std::sort(tokens.begin(), tokens.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    char buf[64];
    for (const std::string* tok : tokens) {
        os << *tok;
        for (double v : table.entries.at(*tok)) {
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            os << ' ' << buf;
        }
        os << '\n';
    }
    if (!os) raise(ErrorCode::io, "failed writing embedding file: " + path);
}

void write_detections_file(const std::string& path,
                           const std::map<std::string, DetectionSet>& detections) {
    std::ofstream os(path);
    if (!os) raise(ErrorCode::io, "cannot write detections file: " + path);
    char buf[256];
    for (const auto& [image_id, set] : detections) {
        std::snprintf(buf, sizeof(buf), "%s image size 1 0 0 %g %g", image_id.c_str(),
                      set.image_w, set.image_h);
        os << buf << '\n';
        // Boxes in detection-index order, mixing kinds as loaded.
        std::vector<std::pair<const BoundingBox*, const char*>> boxes;
        for (const BoundingBox& b : set.persons) boxes.push_back({&b, "person"});
        for (const BoundingBox& b : set.objects) boxes.push_back({&b, "object"});
        std::sort(boxes.begin(), boxes.end(), [](const auto& a, const auto& b) {
            return a.first->det_index < b.first->det_index;
        });
        for (const auto& [box, kind] : boxes) {
            std::snprintf(buf, sizeof(buf), "%s %s %s %.6g %.6g %.6g %.6g %.6g", image_id.c_str(),
                          kind, box->class_label.empty() ? "box" : box->class_label.c_str(),
                          box->confidence, box->x, box->y, box->w, box->h);
            os << buf << '\n';
        }
    }
    if (!os) raise(ErrorCode::io, "failed writing detections file: " + path);
}

void write_selection_pairs(const std::string& fvec_path, const std::string& phrases_path,
                           const std::vector<SelectionPair>& pairs, const std::string& cue,
                           std::size_t dim) {
    std::vector<FeatureRecord> records;
    records.reserve(pairs.size());
    std::ofstream phrases(phrases_path);
    if (!phrases) raise(ErrorCode::io, "cannot write phrases file: " + phrases_path);
    char buf[48];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "pair%06zu", i);
        FeatureRecord rec;
        rec.image_id = buf;
        rec.region = RegionId::whole_image();
        rec.cue = cue;
        rec.vector = pairs[i].feature;
        records.push_back(std::move(rec));
        phrases << buf << '\t' << pairs[i].phrase << '\n';
    }
    write_feature_file(fvec_path, records, dim);
}

std::string role_name(RegionRole role) {
    switch (role) {
        case RegionRole::whole: return "whole";
        case RegionRole::person: return "person";
        case RegionRole::object: return "object";
    }
    return "?";
}

} // namespace

std::string write_synthetic(const SyntheticDataset& data, const SyntheticSpec& spec,
                            const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto path = [&out_dir](const std::string& name) {
        return (fs::path(out_dir) / name).string();
    };

    write_embeddings_file(path("embeddings.txt"), data.embeddings);
    write_vocab(path("person_vocab.txt"), data.person_vocab);
    write_vocab(path("object_vocab.txt"), data.object_vocab);
    write_questions(path("questions_train.tsv"), data.train_questions);
    write_questions(path("questions_test.tsv"), data.test_questions);
    write_detections_file(path("detections.txt"), data.detections);

    // Per-cue feature files.
    std::map<std::string, std::vector<FeatureRecord>> by_cue;
    for (const FeatureRecord& rec : data.store.records()) by_cue[rec.cue].push_back(rec);
    for (const auto& [cue, records] : by_cue)
        write_feature_file(path("features_" + cue + ".fvec"), records,
                           data.registry.require(cue).declared_dim);

    write_selection_pairs(path("selection_person.fvec"), path("selection_person_phrases.tsv"),
                          data.person_pairs, data.person_select_cue,
                          data.registry.require(data.person_select_cue).declared_dim);
    write_selection_pairs(path("selection_object.fvec"), path("selection_object_phrases.tsv"),
                          data.object_pairs, data.object_select_cue,
                          data.registry.require(data.object_select_cue).declared_dim);

    // Hidden planted-box truth, for auditing region selection.
    {
        std::ofstream meta(path("meta.tsv"));
        meta << "# question_id\tplanted_person_det\tplanted_object_det\n";
        for (const Question& q : data.test_questions) {
            auto p = data.planted_person_box.find(q.id);
            auto o = data.planted_object_box.find(q.id);
            meta << q.id << '\t'
                 << (p == data.planted_person_box.end() ? std::string("-")
                                                        : std::to_string(p->second))
                 << '\t'
                 << (o == data.planted_object_box.end() ? std::string("-")
                                                        : std::to_string(o->second))
                 << '\n';
        }
    }

    // Ready-to-run configuration. The [cca] settings are calibrated for
    // desk-scale data: a 300-d text view fitted from a few hundred samples
    // needs a stronger ridge and fewer components than the library defaults.
    std::ostringstream ini;
    ini << "# generated synthetic run configuration\n";
    ini << "[cca]\n";
    ini << "regularization = 0.01\n";
    ini << "ridge_mode = scaled\n";
    ini << "components = 16\n";
    ini << "\n[paths]\n";
    ini << "embeddings = embeddings.txt\n";
    ini << "person_vocab = person_vocab.txt\n";
    ini << "object_vocab = object_vocab.txt\n";
    ini << "questions_train = questions_train.tsv\n";
    ini << "questions_test = questions_test.tsv\n";
    ini << "detections = detections.txt\n";
    ini << "model_dir = models\n";
    ini << "\n[cues]\n";
    const CueRegistry standard = CueRegistry::with_standard_kinds();
    for (const CueKind& kind : data.registry.kinds())
        if (!standard.find(kind.name)) // standard kinds are built in
            ini << kind.name << " = " << kind.declared_dim << '\n';
    ini << "\n[features]\n";
    for (const auto& [cue, records] : by_cue)
        ini << cue << " = features_" << cue << ".fvec\n";
    ini << "\n[selection]\n";
    ini << "person_pairs_features = selection_person.fvec\n";
    ini << "person_pairs_phrases = selection_person_phrases.tsv\n";
    ini << "object_pairs_features = selection_object.fvec\n";
    ini << "object_pairs_phrases = selection_object_phrases.tsv\n";
    ini << "person_feature_cue = " << data.person_select_cue << '\n';
    ini << "object_feature_cue = " << data.object_select_cue << '\n';
    for (const auto& [name, cue_spec] : data.cue_specs) {
        ini << "\n[cue." << name << "]\n";
        ini << "parts = ";
        for (std::size_t i = 0; i < cue_spec.parts.size(); ++i) {
            if (i > 0) ini << ", ";
            ini << role_name(cue_spec.parts[i].role) << ':' << cue_spec.parts[i].cue_kind;
        }
        ini << '\n';
    }
    for (const ScoreConfig& cfg : data.score_configs) {
        for (const auto& [t, e] : cfg.per_type) {
            ini << "\n[config." << cfg.name << '.' << to_string(t) << "]\n";
            ini << "cues = ";
            for (std::size_t i = 0; i < e.cues.size(); ++i) {
                if (i > 0) ini << ", ";
                ini << e.cues[i];
            }
            ini << '\n';
            ini << "preferred = " << e.cues[e.preferred_index] << '\n';
            if (e.use_person_score) ini << "person_score = on\n";
            if (e.use_object_score) ini << "object_score = on\n";
        }
    }
    ini << "\n[synth]\n";
    ini << "seed = " << spec.seed << '\n';
    ini << "n_train = " << spec.n_train << '\n';
    ini << "n_test = " << spec.n_test << '\n';
    ini << "latent_dim = " << spec.latent_dim << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", spec.signal_correlation);
    ini << "signal_correlation = " << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.9g", spec.noise_scale);
    ini << "noise_scale = " << buf << '\n';
    ini << "distractor_mode = " << to_string(spec.distractor_mode) << '\n';
    ini << "question_types = ";
    std::vector<QuestionType> types = spec.question_types;
    if (types.empty())
        types = {QuestionType::Past, QuestionType::PersonAttribute, QuestionType::ObjectAttribute};
    for (std::size_t i = 0; i < types.size(); ++i) {
        if (i > 0) ini << ", ";
        ini << to_string(types[i]);
    }
    ini << '\n';
    ini << "out_dir = .\n";

    const std::string config_path = path("run.ini");
    std::ofstream os(config_path);
    if (!os) raise(ErrorCode::io, "cannot write config: " + config_path);
    os << ini.str();
    if (!os) raise(ErrorCode::io, "failed writing config: " + config_path);
    return config_path;
}

} // namespace cuerank
