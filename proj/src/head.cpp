#include "dess/head.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace dess {

PairLabel pair_label_from_sentiment(Sentiment s) {
    switch (s) {
        case Sentiment::POS: return PairLabel::POS;
        case Sentiment::NEU: return PairLabel::NEU;
        case Sentiment::NEG: return PairLabel::NEG;
    }
    return PairLabel::INVALID;
}

Sentiment sentiment_from_pair_label(PairLabel l) {
    switch (l) {
        case PairLabel::POS: return Sentiment::POS;
        case PairLabel::NEU: return Sentiment::NEU;
        case PairLabel::NEG: return Sentiment::NEG;
        case PairLabel::INVALID: break;
    }
    throw std::invalid_argument("INVALID pair label carries no sentiment");
}

void HeadConfig::validate() const {
    if (max_span < 1 || neg_entity < 0 || neg_triple < 0 || max_pairs < 1 ||
        size_emb_dim < 1 || token_dim < 1 || hidden_dim < 1)
        throw std::invalid_argument("head config values must be positive");
}

void register_head_params(ParamStore& store, const HeadConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    store.add_uniform("head.size_emb", cfg.max_span, cfg.size_emb_dim, rng);
    store.add_uniform("head.entity.w1", cfg.span_rep_dim(), cfg.hidden_dim, rng);
    store.add_zeros("head.entity.b1", 1, cfg.hidden_dim);
    store.add_uniform("head.entity.w2", cfg.hidden_dim, 3, rng);
    store.add_zeros("head.entity.b2", 1, 3);
    store.add_uniform("head.pair.w1", cfg.pair_rep_dim(), cfg.hidden_dim, rng);
    store.add_zeros("head.pair.b1", 1, cfg.hidden_dim);
    store.add_uniform("head.pair.w2", cfg.hidden_dim, 4, rng);
    store.add_zeros("head.pair.b2", 1, 4);
}

std::vector<Span> enumerate_spans(int seq_len, int max_span) {
    std::vector<Span> out;
    for (int start = 0; start < seq_len; ++start)
        for (int end = start; end < seq_len && end - start < max_span; ++end)
            out.push_back(Span{start, end});
    return out;
}

std::size_t span_count(int seq_len, int max_span) {
    std::size_t n = 0;
    for (int l = 1; l <= std::min(max_span, seq_len); ++l)
        n += static_cast<std::size_t>(seq_len - l + 1);
    return n;
}

ad::Var span_representations(Binding& bind, const HeadConfig& cfg, ad::Var features,
                             const std::vector<Span>& candidates) {
    ad::Tape& t = bind.tape();
    int seq = static_cast<int>(t.val(features).rows());
    std::vector<int> starts, ends, widths;
    for (const Span& s : candidates) {
        if (s.start < 0 || s.end >= seq || s.start > s.end)
            throw std::invalid_argument("span candidate out of bounds");
        if (s.width() > cfg.max_span)
            throw std::invalid_argument("span candidate wider than max_span");
        starts.push_back(s.start);
        ends.push_back(s.end);
        widths.push_back(s.width() - 1);
    }
    ad::Var h_start = t.gather_rows(features, starts);
    ad::Var h_end = t.gather_rows(features, ends);
    std::vector<ad::Var> pools;
    pools.reserve(candidates.size());
    for (const Span& s : candidates) pools.push_back(t.mean_rows(features, s.start, s.end));
    ad::Var pooled = t.concat_rows(pools);
    ad::Var sizes = t.gather_rows(bind("head.size_emb"), widths);
    return t.concat_cols(t.concat_cols(t.concat_cols(h_start, h_end), pooled), sizes);
}

namespace {

ad::Var ffn2(Binding& bind, const HeadConfig& cfg, const std::string& prefix, ad::Var x) {
    ad::Tape& t = bind.tape();
    ad::Var h = t.add_rowvec(t.matmul(x, bind(prefix + ".w1")), bind(prefix + ".b1"));
    h = cfg.activation == Activation::Relu ? t.relu(h) : t.softplus(h);
    return t.add_rowvec(t.matmul(h, bind(prefix + ".w2")), bind(prefix + ".b2"));
}

}  // namespace

ad::Var score_entities(Binding& bind, const HeadConfig& cfg, ad::Var span_reps) {
    return ffn2(bind, cfg, "head.entity", span_reps);
}

PairBatch score_pairs(Binding& bind, const HeadConfig& cfg, ad::Var features,
                      ad::Var span_reps, const std::vector<Span>& spans,
                      const std::vector<std::pair<int, int>>& pairs) {
    ad::Tape& t = bind.tape();
    PairBatch out;
    out.pairs = pairs;
    if (pairs.empty()) {
        out.logits = t.constant(ad::Mat::Zero(0, 4));
        return out;
    }
    std::vector<int> a_idx, o_idx;
    std::vector<ad::Var> between;
    int dim = static_cast<int>(t.val(features).cols());
    for (auto [ai, oi] : pairs) {
        const Span& a = spans.at(ai);
        const Span& o = spans.at(oi);
        if (a.overlaps(o)) throw std::invalid_argument("pair spans overlap");
        a_idx.push_back(ai);
        o_idx.push_back(oi);
        int lo = std::min(a.end, o.end) + 1;
        int hi = std::max(a.start, o.start) - 1;
        if (lo > hi)
            between.push_back(t.zeros(1, dim));
        else
            between.push_back(t.mean_rows(features, lo, hi));
    }
    ad::Var a_rep = t.gather_rows(span_reps, a_idx);
    ad::Var o_rep = t.gather_rows(span_reps, o_idx);
    ad::Var rep = t.concat_cols(t.concat_cols(a_rep, o_rep), t.concat_rows(between));
    out.logits = ffn2(bind, cfg, "head.pair", rep);
    return out;
}

std::vector<std::pair<int, int>> cap_pairs(
    const std::vector<std::pair<int, int>>& pairs,
    const std::vector<double>& span_confidence, int max_pairs) {
    if (static_cast<int>(pairs.size()) <= max_pairs) return pairs;
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        double sa = span_confidence[pairs[a].first] + span_confidence[pairs[a].second];
        double sb = span_confidence[pairs[b].first] + span_confidence[pairs[b].second];
        return sa > sb;  // ties keep pair index order (stable)
    });
    std::vector<std::pair<int, int>> out;
    out.reserve(max_pairs);
    for (int k = 0; k < max_pairs; ++k) out.push_back(pairs[order[k]]);
    return out;
}

namespace {

std::size_t rand_below(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

// Deterministic partial Fisher-Yates: first `take` entries are a uniform
// sample without replacement.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t take,
                                          std::mt19937_64& rng) {
    take = std::min(take, pool.size());
    for (std::size_t i = 0; i < take; ++i)
        std::swap(pool[i], pool[i + rand_below(rng, pool.size() - i)]);
    pool.resize(take);
    return pool;
}

}  // namespace

NegativeSamples sample_negatives(const std::set<Triplet>& gold,
                                 const std::vector<Span>& spans,
                                 const HeadConfig& cfg, std::mt19937_64& rng) {
    std::map<Span, int> span_index;
    for (std::size_t i = 0; i < spans.size(); ++i)
        span_index[spans[i]] = static_cast<int>(i);

    NegativeSamples out;
    std::map<int, EntityLabel> gold_entity;  // span index -> label, aspect first
    std::set<std::pair<int, int>> gold_pairs;
    for (const Triplet& t : gold) {
        auto ai = span_index.find(t.aspect);
        auto oi = span_index.find(t.opinion);
        // spans wider than max_span are not enumerable; skip their triplet
        if (ai == span_index.end() || oi == span_index.end()) continue;
        gold_entity.emplace(ai->second, EntityLabel::ASPECT);
        gold_entity.emplace(oi->second, EntityLabel::OPINION);
        gold_pairs.emplace(ai->second, oi->second);
        out.pairs.push_back({ai->second, oi->second, pair_label_from_sentiment(t.sentiment)});
    }
    for (const auto& [idx, label] : gold_entity) out.entities.push_back({idx, label});

    std::vector<int> negative_spans;
    for (std::size_t i = 0; i < spans.size(); ++i)
        if (!gold_entity.count(static_cast<int>(i)))
            negative_spans.push_back(static_cast<int>(i));
    for (int idx : sample_without_replacement(std::move(negative_spans),
                                              static_cast<std::size_t>(cfg.neg_entity), rng))
        out.entities.push_back({idx, EntityLabel::NONE});

    std::size_t n = spans.size();
    if (n >= 2 && cfg.neg_triple > 0) {
        std::size_t total = n * (n - 1);
        if (total <= 10000) {
            std::vector<std::pair<int, int>> pool;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j || spans[i].overlaps(spans[j])) continue;
                    auto pr = std::make_pair(static_cast<int>(i), static_cast<int>(j));
                    if (!gold_pairs.count(pr)) pool.push_back(pr);
                }
            for (auto [ai, oi] : sample_without_replacement(
                     std::move(pool), static_cast<std::size_t>(cfg.neg_triple), rng))
                out.pairs.push_back({ai, oi, PairLabel::INVALID});
        } else {
            std::set<std::pair<int, int>> chosen;
            std::size_t tries = 0, limit = 100u * static_cast<std::size_t>(cfg.neg_triple);
            while (chosen.size() < static_cast<std::size_t>(cfg.neg_triple) &&
                   tries++ < limit) {
                int i = static_cast<int>(rand_below(rng, n));
                int j = static_cast<int>(rand_below(rng, n));
                if (i == j || spans[i].overlaps(spans[j])) continue;
                auto pr = std::make_pair(i, j);
                if (gold_pairs.count(pr) || chosen.count(pr)) continue;
                chosen.insert(pr);
                out.pairs.push_back({i, j, PairLabel::INVALID});
            }
        }
    }
    return out;
}

EntitySelection select_entities(const ad::Mat& entity_logits,
                                const std::vector<Span>& spans) {
    int n = static_cast<int>(spans.size());
    EntitySelection sel;
    sel.label.resize(n);
    sel.conf.resize(n);
    sel.kept.assign(n, false);

    // argmax with first-index tie-break (NONE wins ties), softmax confidence
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (entity_logits(i, c) > entity_logits(i, best)) best = c;
        sel.label[i] = best;
        double mx = entity_logits.row(i).maxCoeff();
        Eigen::Array3d e = (entity_logits.row(i).array() - mx).exp();
        sel.conf[i] = e(best) / e.sum();
    }

    // greedy overlap suppression within each label
    for (int lab : {1, 2}) {
        std::vector<int> cand;
        for (int i = 0; i < n; ++i)
            if (sel.label[i] == lab) cand.push_back(i);
        std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
            if (sel.conf[a] != sel.conf[b]) return sel.conf[a] > sel.conf[b];
            if (spans[a].start != spans[b].start) return spans[a].start < spans[b].start;
            return spans[a].end < spans[b].end;
        });
        std::vector<int> survivors;
        for (int i : cand) {
            bool clash = false;
            for (int s : survivors)
                if (spans[i].overlaps(spans[s])) { clash = true; break; }
            if (!clash) {
                survivors.push_back(i);
                sel.kept[i] = true;
            }
        }
    }
    return sel;
}

std::set<Triplet> decode_triplets(const ad::Mat& entity_logits,
                                  const ad::Mat& pair_logits,
                                  const std::vector<Span>& spans,
                                  const std::vector<std::pair<int, int>>& pairs) {
    if (!entity_logits.allFinite() || !pair_logits.allFinite())
        throw std::invalid_argument("decode_triplets: non-finite logits");
    EntitySelection sel = select_entities(entity_logits, spans);
    const auto& label = sel.label;
    const auto& kept = sel.kept;

    std::set<Triplet> out;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto [ai, oi] = pairs[p];
        if (!kept[ai] || label[ai] != 1) continue;
        if (!kept[oi] || label[oi] != 2) continue;
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (pair_logits(static_cast<int>(p), c) > pair_logits(static_cast<int>(p), best))
                best = c;
        if (best == 0) continue;
        out.insert(Triplet{spans[ai], spans[oi],
                           sentiment_from_pair_label(static_cast<PairLabel>(best))});
    }
    return out;
}

}  // namespace dess
