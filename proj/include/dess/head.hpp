#pragma once

#include <random>
#include <set>
#include <vector>

#include "dess/ad.hpp"
#include "dess/corpus.hpp"
#include "dess/encoder.hpp"
#include "dess/params.hpp"

namespace dess {

enum class EntityLabel { NONE = 0, ASPECT = 1, OPINION = 2 };
enum class PairLabel { INVALID = 0, POS = 1, NEU = 2, NEG = 3 };

PairLabel pair_label_from_sentiment(Sentiment s);
Sentiment sentiment_from_pair_label(PairLabel l);

struct HeadConfig {
    int max_span = 8;
    int neg_entity = 50;
    int neg_triple = 50;
    int max_pairs = 100;
    int size_emb_dim = 25;
    int token_dim = 768;   // per-token feature width fed to the head
    int hidden_dim = 768;  // classifier hidden layer
    Activation activation = Activation::Relu;

    int span_rep_dim() const { return 3 * token_dim + size_emb_dim; }
    int pair_rep_dim() const { return 2 * span_rep_dim() + token_dim; }
    void validate() const;
};

void register_head_params(ParamStore& store, const HeadConfig& cfg, std::mt19937_64& rng);

/// All spans of width 1..max_span within [0, seq_len), ordered by (start, end).
std::vector<Span> enumerate_spans(int seq_len, int max_span);

std::size_t span_count(int seq_len, int max_span);

/// [h_start ; h_end ; mean-pool ; size_embedding(width)] per candidate.
ad::Var span_representations(Binding& bind, const HeadConfig& cfg, ad::Var features,
                             const std::vector<Span>& candidates);

/// n x 3 entity logits from span representations.
ad::Var score_entities(Binding& bind, const HeadConfig& cfg, ad::Var span_reps);

struct PairBatch {
    std::vector<std::pair<int, int>> pairs;  // indices into the span list
    ad::Var logits;                          // |pairs| x 4
};

/// Scores (aspect, opinion) index pairs. Pair representation is
/// [aspect rep ; opinion rep ; mean-pool of tokens strictly between the
/// spans, zero when adjacent].
PairBatch score_pairs(Binding& bind, const HeadConfig& cfg, ad::Var features,
                      ad::Var span_reps, const std::vector<Span>& spans,
                      const std::vector<std::pair<int, int>>& pairs);

/// Ranks candidate pairs by summed entity confidence (descending,
/// original order on ties) and keeps at most max_pairs.
std::vector<std::pair<int, int>> cap_pairs(
    const std::vector<std::pair<int, int>>& pairs,
    const std::vector<double>& span_confidence, int max_pairs);

struct EntitySample {
    int span_index;
    EntityLabel label;
};
struct PairSample {
    int aspect_index;
    int opinion_index;
    PairLabel label;
};
struct NegativeSamples {
    std::vector<EntitySample> entities;
    std::vector<PairSample> pairs;
};

/// Gold spans/pairs as positives plus up to neg_entity / neg_triple
/// uniformly sampled negatives, without replacement, deterministic
/// under the supplied rng.
NegativeSamples sample_negatives(const std::set<Triplet>& gold,
                                 const std::vector<Span>& spans,
                                 const HeadConfig& cfg, std::mt19937_64& rng);

struct EntitySelection {
    std::vector<int> label;      // argmax per span, NONE wins ties
    std::vector<double> conf;    // softmax probability of the argmax label
    std::vector<bool> kept;      // survived greedy overlap suppression
};

/// Argmax labels plus greedy per-label overlap suppression
/// (confidence desc, earlier start then earlier end on ties).
EntitySelection select_entities(const ad::Mat& entity_logits,
                                const std::vector<Span>& spans);

/// Deterministic decoding: keep ASPECT/OPINION argmax spans, greedy
/// overlap suppression per label (confidence desc, earlier start on
/// ties), then one triplet per surviving pair with argmax != INVALID.
std::set<Triplet> decode_triplets(const ad::Mat& entity_logits,
                                  const ad::Mat& pair_logits,
                                  const std::vector<Span>& spans,
                                  const std::vector<std::pair<int, int>>& pairs);

}  // namespace dess
