#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dess::ad {

using Mat = Eigen::MatrixXd;
using MatI = Eigen::MatrixXi;

struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

/// Reverse-mode tape over dense double matrices. Nodes are created in
/// topological order; backward() replays the tape in reverse.
class Tape {
public:
    Var leaf(Mat v, bool requires_grad = true);
    Var constant(Mat v) { return leaf(std::move(v), false); }
    Var zeros(int rows, int cols) { return constant(Mat::Zero(rows, cols)); }

    const Mat& val(Var x) const { return nodes_[x.i].val; }
    const Mat& grad(Var x) const { return nodes_[x.i].grad; }
    bool requires_grad(Var x) const { return nodes_[x.i].rg; }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(out)/d(out)=1 for a 1x1 output and propagates.
    void backward(Var out);

    // ---- elementwise / broadcast ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double c);
    Var cmul(Var a, Var b);
    Var add_rowvec(Var a, Var b);  // b is 1 x cols, broadcast over rows
    Var sigmoid(Var a);
    Var tanh_(Var a);
    Var relu(Var a);
    Var softplus(Var a);
    Var exp_(Var a);

    // ---- linear algebra ----
    Var matmul(Var a, Var b);
    Var transpose(Var a);

    // ---- row-wise normalizers ----
    /// Softmax over the first `valid` columns of each row; remaining
    /// columns get probability 0. valid<0 means all columns.
    Var softmax_rows(Var a, int valid = -1);
    Var log_softmax_rows(Var a);
    Var normalize_rows(Var a);  // divide each row by its sum
    Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-6);

    // ---- shape ops ----
    Var concat_cols(Var a, Var b);
    Var slice_cols(Var a, int start, int n);
    Var concat_rows(const std::vector<Var>& parts);
    Var gather_rows(Var a, std::vector<int> idx);
    Var mean_rows(Var a, int first, int last);  // inclusive range -> 1 x cols
    /// out(i,j) = a(rows(i,j), cols(i,j))
    Var gather_entries(Var a, MatI rows, MatI cols);

    // ---- reductions / losses ----
    Var sum_all(Var a);
    Var mean_all(Var a);
    /// Mean cross-entropy of row-wise logits against integer labels.
    Var cross_entropy_rows(Var logits, std::vector<int> labels);

    /// Inverted-dropout mask; identity when train is false or rate == 0.
    Var dropout(Var a, double rate, bool train, std::mt19937_64& rng);

    /// Throws NumericsError naming `where` if any entry is non-finite.
    void check_finite(Var a, const std::string& where) const;

private:
    friend struct BackCtx;
    struct Node {
        Mat val;
        Mat grad;
        std::function<void(Tape&, int)> back;
        bool rg = false;
    };
    std::vector<Node> nodes_;

    Var push(Mat v, bool rg, std::function<void(Tape&, int)> back);
    Mat& g(int i) { return nodes_[i].grad; }
    const Mat& v(int i) const { return nodes_[i].val; }
    bool rg(int i) const { return nodes_[i].rg; }
};

}  // namespace dess::ad
