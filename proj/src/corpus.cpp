#include "dess/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace dess {

const char* to_string(Sentiment s) {
    switch (s) {
        case Sentiment::POS: return "POS";
        case Sentiment::NEU: return "NEU";
        case Sentiment::NEG: return "NEG";
    }
    return "?";
}

Sentiment sentiment_from_tag(const std::string& tag) {
    if (tag == "POS") return Sentiment::POS;
    if (tag == "NEU") return Sentiment::NEU;
    if (tag == "NEG") return Sentiment::NEG;
    throw ValidationError("unknown sentiment tag: " + tag);
}

namespace {

// Cursor over the triplet-list part of a line; byte offsets are
// reported relative to the whole line.
struct Cursor {
    const std::string& text;
    std::size_t pos;

    char peek() const {
        if (pos >= text.size()) throw ParseError("unexpected end of line", pos);
        return text[pos];
    }
    void expect(char c) {
        if (peek() != c)
            throw ParseError(std::string("expected '") + c + "', got '" + peek() + "'", pos);
        ++pos;
    }
    void skip_spaces() {
        while (pos < text.size() && text[pos] == ' ') ++pos;
    }
    bool done() const { return pos >= text.size(); }
};

int parse_int(Cursor& c) {
    std::size_t start = c.pos;
    while (!c.done() && (std::isdigit(static_cast<unsigned char>(c.text[c.pos])) ||
                         (c.pos == start && c.text[c.pos] == '-')))
        ++c.pos;
    if (c.pos == start) throw ParseError("expected integer", c.pos);
    return std::stoi(c.text.substr(start, c.pos - start));
}

// `[i, j, ...]` -> contiguous run of indices as a Span
Span parse_index_list(Cursor& c, int num_tokens, const char* what) {
    c.expect('[');
    std::vector<int> idx;
    c.skip_spaces();
    if (c.peek() != ']') {
        idx.push_back(parse_int(c));
        c.skip_spaces();
        while (c.peek() == ',') {
            ++c.pos;
            c.skip_spaces();
            idx.push_back(parse_int(c));
            c.skip_spaces();
        }
    }
    c.expect(']');
    if (idx.empty()) throw ValidationError(std::string(what) + " index list is empty");
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (idx[i] != idx[i - 1] + 1)
            throw ValidationError(std::string(what) + " indices are not contiguous");
    if (idx.front() < 0 || idx.back() >= num_tokens)
        throw ValidationError(std::string(what) + " index out of range");
    return Span{idx.front(), idx.back()};
}

std::string parse_quoted(Cursor& c) {
    c.expect('\'');
    std::size_t start = c.pos;
    while (c.peek() != '\'') ++c.pos;
    std::string s = c.text.substr(start, c.pos - start);
    ++c.pos;
    return s;
}

Triplet parse_triplet(Cursor& c, int num_tokens) {
    c.expect('(');
    c.skip_spaces();
    Span aspect = parse_index_list(c, num_tokens, "aspect");
    c.skip_spaces();
    c.expect(',');
    c.skip_spaces();
    Span opinion = parse_index_list(c, num_tokens, "opinion");
    c.skip_spaces();
    c.expect(',');
    c.skip_spaces();
    Sentiment s = sentiment_from_tag(parse_quoted(c));
    c.skip_spaces();
    c.expect(')');
    if (aspect.overlaps(opinion))
        throw ValidationError("aspect and opinion spans overlap");
    return Triplet{aspect, opinion, s};
}

}  // namespace

Sentence parse_aste_line(const std::string& line) {
    const std::string sep = "####";
    std::size_t cut = line.find(sep);
    if (cut == std::string::npos)
        throw ParseError("missing '####' separator", line.size());

    Sentence out;
    std::string text = line.substr(0, cut);
    while (!text.empty() && text.back() == ' ') text.pop_back();
    std::istringstream toks(text);
    std::string tok;
    while (toks >> tok) out.tokens.push_back(tok);
    if (out.tokens.empty()) throw ValidationError("sentence has no tokens");

    Cursor c{line, cut + sep.size()};
    c.skip_spaces();
    c.expect('[');
    c.skip_spaces();
    if (c.peek() != ']') {
        out.gold.insert(parse_triplet(c, static_cast<int>(out.tokens.size())));
        c.skip_spaces();
        while (c.peek() == ',') {
            ++c.pos;
            c.skip_spaces();
            out.gold.insert(parse_triplet(c, static_cast<int>(out.tokens.size())));
            c.skip_spaces();
        }
    }
    c.expect(']');
    c.skip_spaces();
    if (!c.done()) throw ParseError("trailing characters after triplet list", c.pos);
    return out;
}

std::string serialize_sentence(const Sentence& s) {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        if (i) os << ' ';
        os << s.tokens[i];
    }
    os << "####[";
    bool first = true;
    for (const Triplet& t : s.gold) {  // std::set keeps canonical order
        if (!first) os << ", ";
        first = false;
        auto span = [&os](const Span& sp) {
            os << '[';
            for (int i = sp.start; i <= sp.end; ++i) {
                if (i != sp.start) os << ", ";
                os << i;
            }
            os << ']';
        };
        os << '(';
        span(t.aspect);
        os << ", ";
        span(t.opinion);
        os << ", '" << to_string(t.sentiment) << "')";
    }
    os << ']';
    return os.str();
}

std::vector<Sentence> load_sentences(const std::string& path, const std::string& split_name) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<Sentence> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            Sentence s = parse_aste_line(line);
            s.id = split_name + "-" + std::to_string(lineno);
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

DatasetSplit load_split(const std::string& train_path, const std::string& dev_path,
                        const std::string& test_path) {
    DatasetSplit s;
    s.train = load_sentences(train_path, "train");
    s.dev = load_sentences(dev_path, "dev");
    s.test = load_sentences(test_path, "test");
    return s;
}

void attach_dep_heads(std::vector<Sentence>& sentences, const std::string& heads_path) {
    std::ifstream in(heads_path);
    if (!in) throw std::runtime_error("cannot open " + heads_path);
    std::string line;
    std::size_t lineno = 0;
    for (Sentence& s : sentences) {
        if (!std::getline(in, line))
            throw ValidationError(heads_path + ": fewer lines than sentences");
        ++lineno;
        std::istringstream is(line);
        std::vector<int> heads;
        int h;
        while (is >> h) heads.push_back(h);
        if (heads.size() != s.tokens.size())
            throw ValidationError(heads_path + ":" + std::to_string(lineno) +
                                  ": head count does not match token count");
        for (std::size_t i = 0; i < heads.size(); ++i) {
            if (heads[i] == static_cast<int>(i) || heads[i] < -1 ||
                heads[i] >= static_cast<int>(heads.size()))
                throw ValidationError(heads_path + ":" + std::to_string(lineno) +
                                      ": invalid head index");
        }
        s.dep_heads = std::move(heads);
    }
}

DatasetStats dataset_stats(const std::vector<Sentence>& sentences) {
    DatasetStats st;
    st.num_sentences = sentences.size();
    for (const Sentence& s : sentences) {
        st.num_triplets += s.gold.size();
        for (const Triplet& t : s.gold) {
            switch (t.sentiment) {
                case Sentiment::POS: ++st.pos; break;
                case Sentiment::NEU: ++st.neu; break;
                case Sentiment::NEG: ++st.neg; break;
            }
        }
    }
    return st;
}

Vocab build_vocab(const std::vector<Sentence>& sentences, int min_freq) {
    if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
    std::unordered_map<std::string, std::size_t> freq;
    for (const Sentence& s : sentences)
        for (const std::string& tok : s.tokens) ++freq[tok];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : freq)
        if (n >= static_cast<std::size_t>(min_freq)) kept.emplace_back(tok, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab v;
    v.min_freq = min_freq;
    v.id_to_token = {"<pad>", "<unk>"};
    for (auto& [tok, n] : kept) {
        v.token_to_id[tok] = v.size();
        v.id_to_token.push_back(tok);
    }
    return v;
}

EncodeResult encode_tokens(const Vocab& vocab, const Sentence& sentence, int max_len) {
    if (max_len < 1) throw ValidationError("max_len must be >= 1");
    EncodeResult r;
    std::size_t n = std::min<std::size_t>(sentence.tokens.size(), max_len);
    r.ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) r.ids.push_back(vocab.lookup(sentence.tokens[i]));
    for (const Triplet& t : sentence.gold) {
        if (t.aspect.end < static_cast<int>(n) && t.opinion.end < static_cast<int>(n))
            r.gold.insert(t);
        else
            ++r.dropped_triplets;
    }
    return r;
}

}  // namespace dess
