#include "cuerank/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "cuerank/error.hpp"

namespace cuerank {

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
    auto it = entries.find(std::string(token));
    return it == entries.end() ? nullptr : &it->second;
}

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

bool parse_double(std::string_view s, double& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

} // namespace

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(ErrorCode::io, "cannot open embedding file: " + path);

    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (fields.size() < 2)
            raise(ErrorCode::parse, path + ":" + std::to_string(line_no) +
                                        ": embedding line needs a token and at least one value");
        const std::size_t dim = fields.size() - 1;
        if (table.dimension == 0) {
            table.dimension = dim;
        } else if (dim != table.dimension) {
            raise(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(table.dimension) + " values, got " +
                                        std::to_string(dim));
        }
        std::vector<double> vec(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!parse_double(fields[j + 1], vec[j]))
                raise(ErrorCode::parse, path + ":" + std::to_string(line_no) +
                                            ": non-numeric value '" + std::string(fields[j + 1]) + "'");
        }
        std::string token(fields[0]);
        std::transform(token.begin(), token.end(), token.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        auto [it, inserted] = table.entries.emplace(std::move(token), std::move(vec));
        (void)it;
        if (!inserted) ++table.duplicate_count;
    }
    if (table.entries.empty())
        raise(ErrorCode::parse, "embedding file has no entries: " + path);
    return table;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (std::string_view raw : split_ws(text)) {
        std::size_t b = 0, e = raw.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(raw[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(raw[e - 1]))) --e;
        if (b == e) continue;
        std::string tok(raw.substr(b, e - b));
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

EmbedResult embed_text(const EmbeddingTable& table, const std::vector<std::string>& tokens) {
    if (tokens.empty())
        raise(ErrorCode::invalid_argument, "embed_text: empty token sequence");
    EmbedResult res;
    res.vector.assign(table.dimension, 0.0);
    std::size_t matched = 0;
    for (const auto& tok : tokens) {
        const std::vector<double>* vec = table.find(tok);
        if (!vec) continue;
        ++matched;
        for (std::size_t j = 0; j < table.dimension; ++j) res.vector[j] += (*vec)[j];
    }
    if (matched > 0) {
        const double inv = 1.0 / static_cast<double>(matched);
        for (double& v : res.vector) v *= inv;
    }
    res.known_fraction = static_cast<double>(matched) / static_cast<double>(tokens.size());
    return res;
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(ErrorCode::io, "cannot open vocabulary file: " + path);
    Vocabulary vocab;
    std::string line;
    while (std::getline(is, line)) {
        auto tokens = tokenize(line);
        if (!tokens.empty()) vocab.push_back(std::move(tokens));
    }
    return vocab;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

// Longest label in `vocab` matching answer_tokens starting at `pos`;
// returns 0 when nothing matches.
std::size_t longest_match_at(const std::vector<std::string>& answer_tokens, std::size_t pos,
                             const Vocabulary& vocab, std::size_t* label_index) {
    std::size_t best_len = 0;
    for (std::size_t li = 0; li < vocab.size(); ++li) {
        const auto& label = vocab[li];
        if (label.empty() || label.size() <= best_len) continue;
        if (pos + label.size() > answer_tokens.size()) continue;
        bool match = true;
        for (std::size_t j = 0; j < label.size(); ++j) {
            if (answer_tokens[pos + j] != label[j]) {
                match = false;
                break;
            }
        }
        if (match) {
            best_len = label.size();
            *label_index = li;
        }
    }
    return best_len;
}

} // namespace

std::vector<PhraseChunk> extract_chunks(const std::vector<std::string>& answer_tokens,
                                        const Vocabulary& person_vocab,
                                        const Vocabulary& object_vocab) {
    if (person_vocab.empty() || object_vocab.empty())
        raise(ErrorCode::invalid_argument, "extract_chunks: vocabularies must be non-empty");

    std::vector<PhraseChunk> chunks;
    std::size_t pos = 0;
    while (pos < answer_tokens.size()) {
        std::size_t person_label = 0, object_label = 0;
        const std::size_t person_len =
            longest_match_at(answer_tokens, pos, person_vocab, &person_label);
        const std::size_t object_len =
            longest_match_at(answer_tokens, pos, object_vocab, &object_label);
        if (person_len == 0 && object_len == 0) {
            ++pos;
            continue;
        }
        PhraseChunk chunk;
        if (person_len >= object_len) { // person wins ties
            chunk.kind = ChunkKind::person;
            chunk.matched_label = join_tokens(person_vocab[person_label]);
            chunk.end = pos + person_len;
        } else {
            chunk.kind = ChunkKind::object;
            chunk.matched_label = join_tokens(object_vocab[object_label]);
            chunk.end = pos + object_len;
        }
        chunk.begin = pos;
        chunk.tokens.assign(answer_tokens.begin() + static_cast<std::ptrdiff_t>(chunk.begin),
                            answer_tokens.begin() + static_cast<std::ptrdiff_t>(chunk.end));
        pos = chunk.end;
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

} // namespace cuerank
