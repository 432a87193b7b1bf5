#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dess {

struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Contiguous token span, inclusive 0-based word indices.
struct Span {
    int start = 0;
    int end = 0;

    int width() const { return end - start + 1; }
    bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
    auto operator<=>(const Span&) const = default;
};

enum class Sentiment { POS, NEU, NEG };

const char* to_string(Sentiment s);
Sentiment sentiment_from_tag(const std::string& tag);

struct Triplet {
    Span aspect;
    Span opinion;
    Sentiment sentiment = Sentiment::POS;

    auto operator<=>(const Triplet&) const = default;
};

struct Sentence {
    std::string id;
    std::vector<std::string> tokens;
    std::optional<std::vector<int>> dep_heads;  // -1 marks root
    std::set<Triplet> gold;
};

struct DatasetSplit {
    std::vector<Sentence> train;
    std::vector<Sentence> dev;
    std::vector<Sentence> test;
};

/// Word-level vocabulary. PAD=0, UNK=1, the rest assigned by
/// corpus frequency (descending) with lexicographic tie-break.
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;  // dense, index == id
    int min_freq = 1;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& tok) const {
        auto it = token_to_id.find(tok);
        return it == token_to_id.end() ? kUnk : it->second;
    }
};

struct DatasetStats {
    std::size_t num_sentences = 0;
    std::size_t num_triplets = 0;
    std::size_t pos = 0;
    std::size_t neu = 0;
    std::size_t neg = 0;
};

Sentence parse_aste_line(const std::string& line);

/// Canonical line form: tokens, "####", triplets sorted by
/// (aspect, opinion, sentiment). Inverse of parse_aste_line.
std::string serialize_sentence(const Sentence& s);

std::vector<Sentence> load_sentences(const std::string& path, const std::string& split_name);

DatasetSplit load_split(const std::string& train_path, const std::string& dev_path,
                        const std::string& test_path);

/// Attach dependency heads from a sidecar file (one line per sentence,
/// space-separated head indices, -1 = root), aligned by line number.
void attach_dep_heads(std::vector<Sentence>& sentences, const std::string& heads_path);

DatasetStats dataset_stats(const std::vector<Sentence>& sentences);

Vocab build_vocab(const std::vector<Sentence>& sentences, int min_freq);

struct EncodeResult {
    std::vector<int> ids;
    std::set<Triplet> gold;          // triplets surviving truncation
    std::size_t dropped_triplets = 0;
};

EncodeResult encode_tokens(const Vocab& vocab, const Sentence& sentence, int max_len = 128);

}  // namespace dess
