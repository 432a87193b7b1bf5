#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dess/head.hpp"
#include "gradcheck.hpp"

using namespace dess;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat random_mat(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

HeadConfig tiny_head() {
    HeadConfig cfg;
    cfg.max_span = 3;
    cfg.neg_entity = 4;
    cfg.neg_triple = 4;
    cfg.max_pairs = 100;
    cfg.size_emb_dim = 2;
    cfg.token_dim = 3;
    cfg.hidden_dim = 5;
    cfg.activation = Activation::Softplus;
    return cfg;
}

// independently written reference for the deterministic decoder
std::set<Triplet> decode_reference(const Mat& entity_logits, const Mat& pair_logits,
                                   const std::vector<Span>& spans,
                                   const std::vector<std::pair<int, int>>& pairs) {
    int n = static_cast<int>(spans.size());
    std::vector<int> label(n);
    std::vector<double> conf(n);
    for (int i = 0; i < n; ++i) {
        label[i] = 0;
        for (int c = 1; c < 3; ++c)
            if (entity_logits(i, c) > entity_logits(i, label[i])) label[i] = c;
        double denom = 0.0;
        double mx = entity_logits.row(i).maxCoeff();
        for (int c = 0; c < 3; ++c) denom += std::exp(entity_logits(i, c) - mx);
        conf[i] = std::exp(entity_logits(i, label[i]) - mx) / denom;
    }
    std::set<int> kept;
    for (int lab : {1, 2}) {
        std::set<int> remaining;
        for (int i = 0; i < n; ++i)
            if (label[i] == lab) remaining.insert(i);
        while (!remaining.empty()) {
            // pick the best remaining candidate by (conf, start, end)
            int best = -1;
            for (int i : remaining) {
                if (best < 0 || conf[i] > conf[best] ||
                    (conf[i] == conf[best] &&
                     std::make_pair(spans[i].start, spans[i].end) <
                         std::make_pair(spans[best].start, spans[best].end)))
                    best = i;
            }
            remaining.erase(best);
            bool clash = false;
            for (int s : kept)
                if (label[s] == lab && spans[best].overlaps(spans[s])) clash = true;
            if (!clash) kept.insert(best);
        }
    }
    std::set<Triplet> out;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto [ai, oi] = pairs[p];
        if (label[ai] != 1 || label[oi] != 2) continue;
        if (!kept.count(ai) || !kept.count(oi)) continue;
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (pair_logits(static_cast<int>(p), c) > pair_logits(static_cast<int>(p), best))
                best = c;
        if (best == 0) continue;
        Sentiment s = best == 1 ? Sentiment::POS : best == 2 ? Sentiment::NEU
                                                             : Sentiment::NEG;
        out.insert(Triplet{spans[ai], spans[oi], s});
    }
    return out;
}

}  // namespace

TEST_CASE("span enumeration matches the closed form") {
    for (int n : {1, 2, 5, 9}) {
        for (int m : {1, 3, 8}) {
            std::vector<Span> spans = enumerate_spans(n, m);
            int mm = std::min(m, n);
            std::size_t expected =
                static_cast<std::size_t>(n) * mm - static_cast<std::size_t>(mm) * (mm - 1) / 2;
            CHECK(spans.size() == expected);
            CHECK(span_count(n, m) == expected);
            std::set<Span> uniq(spans.begin(), spans.end());
            CHECK(uniq.size() == spans.size());
            for (const Span& s : spans) {
                CHECK(s.start >= 0);
                CHECK(s.end < n);
                CHECK(s.width() <= m);
            }
            // ordered by (start, end)
            CHECK(std::is_sorted(spans.begin(), spans.end()));
        }
    }
}

TEST_CASE("span representations concatenate endpoint, pool and size parts") {
    HeadConfig cfg = tiny_head();
    std::mt19937_64 rng(1);
    ParamStore store;
    register_head_params(store, cfg, rng);
    std::mt19937_64 xr(2);
    Mat feats = random_mat(5, cfg.token_dim, xr);
    std::vector<Span> cands = {{0, 0}, {1, 3}, {2, 4}};

    Tape t;
    Binding bind(t, store);
    Mat reps = t.val(span_representations(bind, cfg, t.constant(feats), cands));
    REQUIRE(reps.rows() == 3);
    REQUIRE(reps.cols() == cfg.span_rep_dim());
    const Mat& size_emb = store.value("head.size_emb");
    int d = cfg.token_dim;
    for (int i = 0; i < 3; ++i) {
        const Span& s = cands[i];
        CHECK(reps.row(i).segment(0, d).isApprox(feats.row(s.start), 1e-12));
        CHECK(reps.row(i).segment(d, d).isApprox(feats.row(s.end), 1e-12));
        Mat pool = feats.middleRows(s.start, s.width()).colwise().mean();
        CHECK(reps.row(i).segment(2 * d, d).isApprox(pool.row(0), 1e-12));
        CHECK(reps.row(i).tail(cfg.size_emb_dim)
                  .isApprox(size_emb.row(s.width() - 1), 1e-12));
    }

    CHECK_THROWS_AS(span_representations(bind, cfg, t.constant(feats), {{0, 4}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(span_representations(bind, cfg, t.constant(feats), {{3, 5}}),
                    std::invalid_argument);
}

TEST_CASE("zero classifier weights give logits equal to the output bias") {
    HeadConfig cfg = tiny_head();
    std::mt19937_64 rng(3);
    ParamStore store;
    register_head_params(store, cfg, rng);
    store.value("head.entity.w2").setZero();
    store.value("head.entity.b2") << 0.1, 0.2, 0.3;

    std::mt19937_64 xr(4);
    Mat feats = random_mat(4, cfg.token_dim, xr);
    std::vector<Span> spans = enumerate_spans(4, cfg.max_span);
    Tape t;
    Binding bind(t, store);
    Var reps = span_representations(bind, cfg, t.constant(feats), spans);
    Mat logits = t.val(score_entities(bind, cfg, reps));
    REQUIRE(logits.rows() == static_cast<int>(spans.size()));
    REQUIRE(logits.cols() == 3);
    for (int i = 0; i < logits.rows(); ++i)
        CHECK(logits.row(i).isApprox(store.value("head.entity.b2").row(0), 1e-12));
}

TEST_CASE("pair scoring uses the tokens strictly between the spans") {
    HeadConfig cfg = tiny_head();
    std::mt19937_64 rng(5);
    ParamStore store;
    register_head_params(store, cfg, rng);
    std::mt19937_64 xr(6);
    Mat feats = random_mat(6, cfg.token_dim, xr);
    std::vector<Span> spans = {{0, 0}, {1, 1}, {4, 5}};

    auto logits_for = [&](const Mat& f, std::pair<int, int> pr) {
        Tape t;
        Binding bind(t, store);
        Var fv = t.constant(f);
        Var reps = span_representations(bind, cfg, fv, spans);
        return t.val(score_pairs(bind, cfg, fv, reps, spans, {pr}).logits);
    };

    // tokens 2..3 sit between span 1 and span 2: changing them moves the score
    Mat altered = feats;
    altered.row(2).array() += 1.0;
    CHECK(!logits_for(feats, {1, 2}).isApprox(logits_for(altered, {1, 2}), 1e-9));
    // but adjacent spans 0 and 1 have no between tokens, so row 2 is irrelevant
    CHECK(logits_for(feats, {0, 1}).isApprox(logits_for(altered, {0, 1}), 1e-12));

    Tape t;
    Binding bind(t, store);
    Var fv = t.constant(feats);
    Var reps = span_representations(bind, cfg, fv, spans);
    CHECK(t.val(score_pairs(bind, cfg, fv, reps, spans, {}).logits).rows() == 0);
    std::vector<Span> overlapping = {{0, 1}, {1, 2}};
    Var reps2 = span_representations(bind, cfg, fv, overlapping);
    CHECK_THROWS_AS(score_pairs(bind, cfg, fv, reps2, overlapping, {{0, 1}}),
                    std::invalid_argument);
}

TEST_CASE("pair cap keeps the highest-confidence pairs") {
    std::vector<std::pair<int, int>> pairs = {{0, 1}, {2, 3}, {0, 3}, {2, 1}};
    std::vector<double> conf = {0.9, 0.1, 0.5, 0.5};
    CHECK(cap_pairs(pairs, conf, 10) == pairs);

    auto kept = cap_pairs(pairs, conf, 2);
    // sums: 1.0, 0.6, 1.4, 0.6 -> keep {0,3} then {0,1}
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == std::make_pair(0, 3));
    CHECK(kept[1] == std::make_pair(0, 1));

    // ties keep the original order
    std::vector<double> equal_conf = {0.5, 0.5, 0.5, 0.5};
    auto tied = cap_pairs(pairs, equal_conf, 3);
    CHECK(tied == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}, {0, 3}});
}

TEST_CASE("negative sampling is deterministic, capped and duplicate-free") {
    HeadConfig cfg = tiny_head();
    std::vector<Span> spans = enumerate_spans(6, cfg.max_span);
    std::set<Triplet> gold = {Triplet{{0, 0}, {2, 2}, Sentiment::POS},
                              Triplet{{4, 4}, {2, 2}, Sentiment::NEG}};

    std::mt19937_64 r1(77), r2(77), r3(78);
    NegativeSamples a = sample_negatives(gold, spans, cfg, r1);
    NegativeSamples b = sample_negatives(gold, spans, cfg, r2);
    NegativeSamples c = sample_negatives(gold, spans, cfg, r3);

    auto entity_key = [](const EntitySample& e) {
        return std::make_pair(e.span_index, static_cast<int>(e.label));
    };
    REQUIRE(a.entities.size() == b.entities.size());
    for (std::size_t i = 0; i < a.entities.size(); ++i)
        CHECK(entity_key(a.entities[i]) == entity_key(b.entities[i]));

    // 3 gold spans + neg_entity sampled negatives
    CHECK(a.entities.size() == 3 + static_cast<std::size_t>(cfg.neg_entity));
    std::set<int> seen;
    int positives = 0, negatives = 0;
    for (const EntitySample& e : a.entities) {
        CHECK(seen.insert(e.span_index).second);  // no duplicates
        e.label == EntityLabel::NONE ? ++negatives : ++positives;
    }
    CHECK(positives == 3);
    CHECK(negatives == cfg.neg_entity);

    // 2 gold pairs + neg_triple invalids, none overlapping, none gold
    CHECK(a.pairs.size() == 2 + static_cast<std::size_t>(cfg.neg_triple));
    for (const PairSample& p : a.pairs) {
        CHECK(!spans[p.aspect_index].overlaps(spans[p.opinion_index]));
        if (p.label == PairLabel::INVALID) {
            Span asp = spans[p.aspect_index], op = spans[p.opinion_index];
            for (const Triplet& t : gold)
                CHECK(!(asp == t.aspect && op == t.opinion));
        }
    }

    // a different seed should give a different negative draw
    bool any_diff = false;
    for (std::size_t i = 0; i < a.entities.size(); ++i)
        if (a.entities[i].span_index != c.entities[i].span_index) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("negative sampling clamps to the available pool") {
    HeadConfig cfg = tiny_head();
    cfg.neg_entity = 1000;
    cfg.neg_triple = 1000;
    std::vector<Span> spans = enumerate_spans(3, cfg.max_span);  // 6 spans
    std::set<Triplet> gold = {Triplet{{0, 0}, {2, 2}, Sentiment::POS}};
    std::mt19937_64 rng(5);
    NegativeSamples s = sample_negatives(gold, spans, cfg, rng);
    CHECK(s.entities.size() == spans.size());
    // pair pool: ordered non-overlapping pairs minus the gold one
    std::size_t pool = 0;
    for (std::size_t i = 0; i < spans.size(); ++i)
        for (std::size_t j = 0; j < spans.size(); ++j)
            if (i != j && !spans[i].overlaps(spans[j])) ++pool;
    CHECK(s.pairs.size() == pool);  // 1 gold + (pool - 1) negatives
}

TEST_CASE("gold spans wider than max_span are skipped") {
    HeadConfig cfg = tiny_head();
    std::vector<Span> spans = enumerate_spans(8, cfg.max_span);
    std::set<Triplet> gold = {Triplet{{0, 4}, {6, 6}, Sentiment::POS}};  // width 5
    std::mt19937_64 rng(5);
    NegativeSamples s = sample_negatives(gold, spans, cfg, rng);
    for (const EntitySample& e : s.entities) CHECK(e.label == EntityLabel::NONE);
    for (const PairSample& p : s.pairs) CHECK(p.label == PairLabel::INVALID);
}

TEST_CASE("entity selection ties favor the null label") {
    std::vector<Span> spans = {{0, 0}, {1, 1}};
    Mat logits(2, 3);
    logits << 1.0, 1.0, 0.5,   // NONE ties ASPECT -> NONE
              0.2, 0.9, 0.9;   // ASPECT ties OPINION -> ASPECT
    EntitySelection sel = select_entities(logits, spans);
    CHECK(sel.label[0] == 0);
    CHECK(sel.label[1] == 1);
}

TEST_CASE("overlap suppression keeps the more confident span") {
    std::vector<Span> spans = {{0, 1}, {1, 2}, {3, 3}};
    Mat logits(3, 3);
    logits << 0.0, 2.0, -1.0,   // aspect, conf high
              0.0, 5.0, -1.0,   // aspect, conf higher, overlaps previous
              0.0, -1.0, 3.0;   // opinion
    EntitySelection sel = select_entities(logits, spans);
    CHECK(sel.kept[1]);
    CHECK(!sel.kept[0]);
    CHECK(sel.kept[2]);
}

TEST_CASE("decoder matches an independent reference on random inputs") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int seed = 0; seed < 200; ++seed) {
        int seq = 2 + static_cast<int>(rng() % 5);  // up to 6 tokens
        std::vector<Span> spans = enumerate_spans(seq, 3);
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t i = 0; i < spans.size(); ++i)
            for (std::size_t j = 0; j < spans.size(); ++j)
                if (i != j && !spans[i].overlaps(spans[j]))
                    pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));

        Mat el(spans.size(), 3), pl(pairs.size(), 4);
        for (int r = 0; r < el.rows(); ++r)
            for (int c = 0; c < 3; ++c) el(r, c) = n(rng);
        for (int r = 0; r < pl.rows(); ++r)
            for (int c = 0; c < 4; ++c) pl(r, c) = n(rng);
        // occasionally force exact ties to exercise the tie rules
        if (seed % 5 == 0 && el.rows() > 1) {
            el(0, 1) = el(0, 0);
            el(1, 2) = el(1, 1);
        }

        std::set<Triplet> got = decode_triplets(el, pl, spans, pairs);
        std::set<Triplet> want = decode_reference(el, pl, spans, pairs);
        REQUIRE(got == want);
    }
}

TEST_CASE("decoded spans never overlap within a label") {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> n(0.0, 2.0);
    std::vector<Span> spans = enumerate_spans(6, 3);
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < spans.size(); ++i)
        for (std::size_t j = 0; j < spans.size(); ++j)
            if (i != j && !spans[i].overlaps(spans[j]))
                pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    for (int iter = 0; iter < 50; ++iter) {
        Mat el(spans.size(), 3), pl(pairs.size(), 4);
        for (int r = 0; r < el.rows(); ++r)
            for (int c = 0; c < 3; ++c) el(r, c) = n(rng);
        for (int r = 0; r < pl.rows(); ++r)
            for (int c = 0; c < 4; ++c) pl(r, c) = n(rng);
        std::set<Triplet> out = decode_triplets(el, pl, spans, pairs);
        for (const Triplet& a : out) {
            CHECK(!a.aspect.overlaps(a.opinion));
            for (const Triplet& b : out) {
                if (a < b) {
                    if (!(a.aspect == b.aspect)) CHECK(!a.aspect.overlaps(b.aspect));
                    if (!(a.opinion == b.opinion)) CHECK(!a.opinion.overlaps(b.opinion));
                }
            }
        }
    }
}

TEST_CASE("head gradient check") {
    HeadConfig cfg = tiny_head();
    std::mt19937_64 rng(7);
    ParamStore store;
    register_head_params(store, cfg, rng);
    store.add("features", random_mat(5, cfg.token_dim, rng));
    std::vector<Span> spans = enumerate_spans(5, cfg.max_span);
    std::vector<std::pair<int, int>> pairs = {{0, 5}, {3, 9}};
    std::vector<int> entity_labels(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) entity_labels[i] = i % 3;

    auto res = testing::gradient_check(store, [&](Tape& t, Binding& bind) {
        Var feats = bind("features");
        Var reps = span_representations(bind, cfg, feats, spans);
        Var el = score_entities(bind, cfg, reps);
        PairBatch pb = score_pairs(bind, cfg, feats, reps, spans, pairs);
        Var loss = t.cross_entropy_rows(el, entity_labels);
        return t.add(loss, t.cross_entropy_rows(pb.logits, {1, 0}));
    });
    CAPTURE(res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
}
