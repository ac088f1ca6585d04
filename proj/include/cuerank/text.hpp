#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cuerank/error.hpp"

namespace cuerank {

// Word-embedding lookup table. Immutable after load.
struct EmbeddingTable {
    std::size_t dimension = 0;
    std::unordered_map<std::string, std::vector<double>> entries;
    std::size_t duplicate_count = 0; // duplicate tokens skipped at load (first kept)

    const std::vector<double>* find(std::string_view token) const;
    std::size_t size() const { return entries.size(); }
};

// Plain text, one entry per line: token v1 v2 ... vD, space-separated.
EmbeddingTable load_embeddings(const std::string& path);

// Lowercase, split on whitespace, strip leading/trailing punctuation per token.
std::vector<std::string> tokenize(std::string_view text);

struct EmbedResult {
    std::vector<double> vector;
    double known_fraction = 0.0; // matched tokens / total tokens
};

// Mean of the vectors of tokens present in the table; unknown tokens are
// skipped. All-unknown input yields the zero vector with known_fraction 0.
EmbedResult embed_text(const EmbeddingTable& table, const std::vector<std::string>& tokens);

enum class ChunkKind { person, object };

struct PhraseChunk {
    ChunkKind kind = ChunkKind::person;
    std::vector<std::string> tokens; // answer tokens in [begin, end)
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string matched_label; // vocabulary entry that triggered the match
};

// One label per line; labels may be multi-token. Labels are tokenized with
// the same rules as answer text.
using Vocabulary = std::vector<std::vector<std::string>>;
Vocabulary load_vocabulary(const std::string& path);

// Greedy longest-match, left-to-right, non-overlapping scan over the answer
// tokens; the person vocabulary wins over the object vocabulary at equal
// match length. Chunks come back in span order.
std::vector<PhraseChunk> extract_chunks(const std::vector<std::string>& answer_tokens,
                                        const Vocabulary& person_vocab,
                                        const Vocabulary& object_vocab);

} // namespace cuerank
