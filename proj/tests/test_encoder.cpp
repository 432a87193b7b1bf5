#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dess/encoder.hpp"
#include "gradcheck.hpp"

using namespace dess;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.vocab_size = 7;
    cfg.hidden_dim = 8;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    cfg.max_rel_distance = 3;
    cfg.ffn_dim = 10;
    cfg.dropout_rate = 0.0;
    cfg.max_len = 16;
    cfg.activation = Activation::Softplus;
    return cfg;
}

Mat softmax_row(const Eigen::RowVectorXd& x) {
    Eigen::RowVectorXd e = (x.array() - x.maxCoeff()).exp();
    return e / e.sum();
}

}  // namespace

TEST_CASE("relative position buckets") {
    int k = 4;
    CHECK(relative_position_bucket(0, 0, k) == k);
    CHECK(relative_position_bucket(3, 1, k) == 2 + k);
    CHECK(relative_position_bucket(1, 3, k) == -2 + k);
    // clamped at the window edges
    CHECK(relative_position_bucket(100, 0, k) == 2 * k - 1);
    CHECK(relative_position_bucket(0, 100, k) == 0);
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            int b = relative_position_bucket(i, j, k);
            CHECK(b >= 0);
            CHECK(b < 2 * k);
        }
    }
    // distinct buckets exactly for offsets inside the window
    CHECK(relative_position_bucket(2, 0, k) != relative_position_bucket(3, 0, k));
    CHECK(relative_position_bucket(0, 2, k) != relative_position_bucket(0, 3, k));
}

TEST_CASE("parameter count matches the closed form") {
    EncoderConfig cfg = tiny_config();
    std::mt19937_64 rng(1);
    ParamStore store;
    register_encoder_params(store, cfg, rng);
    std::size_t h = cfg.hidden_dim, f = cfg.ffn_dim, k = cfg.max_rel_distance;
    std::size_t per_layer = 4 * h * h     // wq wk wv wo
                            + 4 * h       // their biases
                            + 2 * k * h   // relative-position table
                            + 2 * h * f + f + h  // ffn
                            + 4 * h;      // two layer norms
    std::size_t expected = cfg.vocab_size * h + cfg.num_layers * per_layer;
    CHECK(store.scalar_count() == expected);
}

TEST_CASE("attention maps are row-stochastic") {
    EncoderConfig cfg = tiny_config();
    cfg.num_layers = 2;
    std::mt19937_64 rng(2), drop(3);
    ParamStore store;
    register_encoder_params(store, cfg, rng);
    Tape t;
    Binding bind(t, store);
    EncodeOut out = encode(bind, cfg, {1, 4, 2, 6, 0}, false, drop);
    REQUIRE(out.attention.size() == 2);
    for (const auto& layer : out.attention) {
        REQUIRE(static_cast<int>(layer.size()) == cfg.num_heads);
        for (Var head : layer) {
            const Mat& p = t.val(head);
            REQUIRE(p.rows() == 5);
            for (int r = 0; r < p.rows(); ++r) {
                CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(p.row(r).minCoeff() >= 0.0);
            }
        }
    }
}

TEST_CASE("zero relative table reduces to standard attention") {
    // independent oracle: plain scaled dot-product attention computed with
    // raw Eigen from the stored weights, temperature sqrt(3 * head_dim)
    EncoderConfig cfg = tiny_config();
    std::mt19937_64 rng(5), drop(6);
    ParamStore store;
    register_encoder_params(store, cfg, rng);
    store.value("encoder.l0.attn.rel").setZero();

    int seq = 4, h = cfg.hidden_dim, dh = cfg.head_dim();
    std::mt19937_64 xr(9);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat x(seq, h);
    for (int i = 0; i < seq; ++i)
        for (int j = 0; j < h; ++j) x(i, j) = n(xr);

    Tape t;
    Binding bind(t, store);
    AttentionOut att =
        disentangled_attention(bind, "encoder.l0.", cfg, t.constant(x), false, drop);

    Mat q = (x * store.value("encoder.l0.attn.wq")).rowwise() +
            store.value("encoder.l0.attn.bq").row(0);
    Mat kk = (x * store.value("encoder.l0.attn.wk")).rowwise() +
             store.value("encoder.l0.attn.bk").row(0);
    Mat v = (x * store.value("encoder.l0.attn.wv")).rowwise() +
            store.value("encoder.l0.attn.bv").row(0);
    Mat cat(seq, h);
    for (int head = 0; head < cfg.num_heads; ++head) {
        Mat qh = q.middleCols(head * dh, dh);
        Mat kh = kk.middleCols(head * dh, dh);
        Mat vh = v.middleCols(head * dh, dh);
        Mat score = qh * kh.transpose() / std::sqrt(3.0 * dh);
        Mat probs(seq, seq);
        for (int r = 0; r < seq; ++r) probs.row(r) = softmax_row(score.row(r));
        cat.middleCols(head * dh, dh) = probs * vh;
        CHECK(t.val(att.head_maps[head]).isApprox(probs, 1e-10));
    }
    Mat expected = (cat * store.value("encoder.l0.attn.wo")).rowwise() +
                   store.value("encoder.l0.attn.bo").row(0);
    CHECK(t.val(att.features).isApprox(expected, 1e-10));
}

TEST_CASE("nonzero relative table changes the scores") {
    EncoderConfig cfg = tiny_config();
    std::mt19937_64 rng(5), d1(6), d2(6);
    ParamStore store;
    register_encoder_params(store, cfg, rng);
    std::vector<int> ids = {1, 2, 3, 4};
    Tape t1;
    Binding b1(t1, store);
    Mat with_rel = t1.val(encode(b1, cfg, ids, false, d1).features);
    store.value("encoder.l0.attn.rel").setZero();
    Tape t2;
    Binding b2(t2, store);
    Mat without = t2.val(encode(b2, cfg, ids, false, d2).features);
    CHECK(!with_rel.isApprox(without, 1e-6));
}

TEST_CASE("encoder forward is deterministic") {
    EncoderConfig cfg = tiny_config();
    std::vector<int> ids = {3, 1, 4, 1, 5};
    Mat a, b;
    for (int rep = 0; rep < 2; ++rep) {
        std::mt19937_64 rng(11), drop(12);
        ParamStore store;
        register_encoder_params(store, cfg, rng);
        Tape t;
        Binding bind(t, store);
        Mat out = t.val(encode(bind, cfg, ids, false, drop).features);
        (rep == 0 ? a : b) = out;
    }
    CHECK(a == b);
}

TEST_CASE("padding after valid_len does not change valid rows") {
    EncoderConfig cfg = tiny_config();
    std::mt19937_64 rng(13);
    ParamStore store;
    register_encoder_params(store, cfg, rng);
    std::vector<int> ids = {2, 5, 3};
    std::mt19937_64 d1(1), d2(1);
    Tape t1;
    Binding b1(t1, store);
    Mat plain = t1.val(encode(b1, cfg, ids, false, d1).features);

    std::vector<int> padded = ids;
    padded.insert(padded.end(), {0, 0, 0});
    Tape t2;
    Binding b2(t2, store);
    Mat with_pad = t2.val(encode(b2, cfg, padded, false, d2, 3).features);
    CHECK(with_pad.topRows(3).isApprox(plain, 1e-10));

    // and swapping the pad ids for other tokens changes nothing
    std::vector<int> padded2 = ids;
    padded2.insert(padded2.end(), {6, 1, 4});
    Tape t3;
    Binding b3(t3, store);
    Mat with_pad2 = t3.val(encode(b3, cfg, padded2, false, d2, 3).features);
    CHECK(with_pad2.topRows(3).isApprox(plain, 1e-10));
}

TEST_CASE("full encoder gradient check") {
    EncoderConfig cfg;
    cfg.vocab_size = 5;
    cfg.hidden_dim = 6;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    cfg.max_rel_distance = 2;
    cfg.ffn_dim = 6;
    cfg.dropout_rate = 0.0;
    cfg.activation = Activation::Softplus;  // smooth everywhere
    std::mt19937_64 rng(17);
    ParamStore store;
    register_encoder_params(store, cfg, rng);

    std::vector<int> ids = {1, 3, 0, 2};
    std::mt19937_64 wrng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat w(4, cfg.hidden_dim);
    for (int i = 0; i < w.rows(); ++i)
        for (int j = 0; j < w.cols(); ++j) w(i, j) = n(wrng);

    auto res = testing::gradient_check(store, [&](Tape& t, Binding& bind) {
        std::mt19937_64 drop(1);
        Var f = encode(bind, cfg, ids, false, drop).features;
        return t.sum_all(t.cmul(f, t.constant(w)));
    });
    CAPTURE(res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("encoder input validation") {
    EncoderConfig cfg = tiny_config();
    std::mt19937_64 rng(1), drop(1);
    ParamStore store;
    register_encoder_params(store, cfg, rng);
    Tape t;
    Binding bind(t, store);
    CHECK_THROWS_AS(encode(bind, cfg, {0, 99}, false, drop), std::invalid_argument);
    std::vector<int> too_long(cfg.max_len + 1, 1);
    CHECK_THROWS_AS(encode(bind, cfg, too_long, false, drop), std::invalid_argument);

    EncoderConfig bad = cfg;
    bad.hidden_dim = 9;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
