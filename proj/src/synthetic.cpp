#include "dess/synthetic.hpp"

#include <array>
#include <random>

namespace dess {

namespace {

struct OpinionWord {
    const char* word;
    Sentiment sentiment;
};

constexpr std::array<const char*, 8> kAspects = {
    "food", "service", "screen", "battery", "keyboard", "price", "staff", "design"};

constexpr std::array<OpinionWord, 10> kOpinions = {{
    {"great", Sentiment::POS},
    {"tasty", Sentiment::POS},
    {"bright", Sentiment::POS},
    {"sturdy", Sentiment::POS},
    {"slow", Sentiment::NEG},
    {"noisy", Sentiment::NEG},
    {"dim", Sentiment::NEG},
    {"pricey", Sentiment::NEG},
    {"okay", Sentiment::NEU},
    {"average", Sentiment::NEU},
}};

}  // namespace

std::vector<Sentence> synthetic_corpus(std::size_t n, std::uint64_t seed,
                                       const std::string& id_prefix) {
    std::mt19937_64 rng(seed);
    auto pick = [&rng](std::size_t m) { return static_cast<std::size_t>(rng() % m); };

    std::vector<Sentence> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sentence s;
        s.id = id_prefix + "-" + std::to_string(i + 1);
        std::size_t a1 = pick(kAspects.size());
        const OpinionWord& o1 = kOpinions[pick(kOpinions.size())];
        bool two = pick(2) == 1;
        if (!two) {
            // the A is/was (very) O
            const char* verb = pick(2) ? "is" : "was";
            bool very = pick(2) == 1;
            s.tokens = {"the", kAspects[a1], verb};
            if (very) s.tokens.push_back("very");
            s.tokens.push_back(o1.word);
            int opos = static_cast<int>(s.tokens.size()) - 1;
            s.gold.insert(Triplet{Span{1, 1}, Span{opos, opos}, o1.sentiment});
        } else {
            // the A was O but the B was O2
            std::size_t a2 = pick(kAspects.size());
            while (a2 == a1) a2 = pick(kAspects.size());
            const OpinionWord& o2 = kOpinions[pick(kOpinions.size())];
            s.tokens = {"the", kAspects[a1], "was", o1.word,
                        "but", "the",       kAspects[a2], "was", o2.word};
            s.gold.insert(Triplet{Span{1, 1}, Span{3, 3}, o1.sentiment});
            s.gold.insert(Triplet{Span{6, 6}, Span{8, 8}, o2.sentiment});
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace dess
