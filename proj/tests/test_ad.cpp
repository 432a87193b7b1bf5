#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dess/ad.hpp"
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

// gradient-check a single op applied to store tensors "a" (and "b")
void check_op(const std::function<Var(Tape&, Binding&)>& build, int ar, int ac,
              int br = 0, int bc = 0, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    ParamStore store;
    store.add("a", random_mat(ar, ac, rng));
    if (br > 0) store.add("b", random_mat(br, bc, rng));
    auto res = testing::gradient_check(
        store, [&](Tape& t, Binding& bind) { return build(t, bind); });
    CAPTURE(res.worst_param);
    CHECK(res.max_rel_err < 1e-6);
}

}  // namespace

TEST_CASE("matmul and add gradients") {
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.matmul(b("a"), b("b"))); }, 3, 4,
             4, 2);
    check_op([](Tape& t, Binding& b) { return t.mean_all(t.add(b("a"), b("b"))); }, 3, 3, 3,
             3);
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.cmul(b("a"), b("b"))); }, 2, 5, 2,
             5);
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.add_rowvec(b("a"), b("b"))); }, 4,
             3, 1, 3);
}

TEST_CASE("nonlinearity gradients") {
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.sigmoid(b("a"))); }, 3, 3);
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.tanh_(b("a"))); }, 3, 3);
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.softplus(b("a"))); }, 3, 3);
    check_op([](Tape& t, Binding& b) { return t.sum_all(t.exp_(b("a"))); }, 2, 2);
    // relu checked away from the kink
    std::mt19937_64 rng(9);
    ParamStore store;
    Mat a = random_mat(3, 3, rng);
    a.array() += (a.array() > 0).cast<double>() * 0.5 - (a.array() <= 0).cast<double>() * 0.5;
    store.add("a", a);
    auto res = testing::gradient_check(
        store, [](Tape& t, Binding& b) { return t.sum_all(t.relu(b("a"))); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("row-normalizer gradients") {
    // weighted sums make the reductions non-trivial
    std::mt19937_64 rng(3);
    Mat w = random_mat(4, 5, rng);
    check_op(
        [w](Tape& t, Binding& b) {
            return t.sum_all(t.cmul(t.softmax_rows(b("a")), t.constant(w)));
        },
        4, 5);
    check_op(
        [w](Tape& t, Binding& b) {
            return t.sum_all(t.cmul(t.log_softmax_rows(b("a")), t.constant(w)));
        },
        4, 5);
    Mat w2 = random_mat(3, 4, rng);
    check_op(
        [w2](Tape& t, Binding& b) {
            // shift positive so row sums stay positive
            Var pos = t.softplus(b("a"));
            return t.sum_all(t.cmul(t.normalize_rows(pos), t.constant(w2)));
        },
        3, 4);
}

TEST_CASE("masked softmax ignores invalid columns") {
    Tape t;
    Mat x(2, 4);
    x << 1, 2, 3, 100, 0, 0, 0, -50;
    Var p = t.softmax_rows(t.constant(x), 3);
    const Mat& y = t.val(p);
    CHECK(y(0, 3) == 0.0);
    CHECK(y(1, 3) == 0.0);
    CHECK(y.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.row(1).head(3).isApproxToConstant(1.0 / 3.0, 1e-12));
}

TEST_CASE("layer norm gradient") {
    std::mt19937_64 rng(11);
    Mat w = random_mat(4, 6, rng);
    check_op(
        [w](Tape& t, Binding& b) {
            return t.sum_all(
                t.cmul(t.layer_norm_rows(b("a"), b("b"), b("b")), t.constant(w)));
        },
        4, 6, 1, 6);
}

TEST_CASE("shape op gradients") {
    check_op(
        [](Tape& t, Binding& b) {
            Var c = t.concat_cols(b("a"), b("b"));
            return t.sum_all(t.cmul(c, c));
        },
        3, 2, 3, 4);
    check_op(
        [](Tape& t, Binding& b) {
            Var s = t.slice_cols(b("a"), 1, 2);
            return t.sum_all(t.cmul(s, s));
        },
        3, 5);
    check_op(
        [](Tape& t, Binding& b) {
            Var g = t.gather_rows(b("a"), {0, 2, 2, 1});
            return t.sum_all(t.cmul(g, g));
        },
        3, 4);
    check_op(
        [](Tape& t, Binding& b) {
            Var m = t.mean_rows(b("a"), 1, 3);
            return t.sum_all(t.cmul(m, m));
        },
        5, 3);
    check_op(
        [](Tape& t, Binding& b) {
            ad::MatI rows(2, 2), cols(2, 2);
            rows << 0, 1, 1, 0;
            cols << 2, 0, 1, 1;
            Var g = t.gather_entries(b("a"), rows, cols);
            return t.sum_all(t.cmul(g, g));
        },
        2, 3);
}

TEST_CASE("cross entropy matches closed form and gradients") {
    Tape t;
    Var logits = t.constant(Mat::Zero(2, 3));
    Var ce = t.cross_entropy_rows(logits, {0, 2});
    CHECK(t.val(ce)(0, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    check_op(
        [](Tape& tt, Binding& b) { return tt.cross_entropy_rows(b("a"), {1, 0, 2, 1}); },
        4, 3);
}

TEST_CASE("backward through reused nodes accumulates") {
    Tape t;
    Var a = t.leaf(Mat::Constant(1, 1, 3.0));
    Var y = t.add(t.cmul(a, a), a);  // y = a^2 + a, dy/da = 2a + 1 = 7
    t.backward(y);
    CHECK(t.grad(a)(0, 0) == doctest::Approx(7.0));
}
