#include "dess/ad.hpp"

#include <cmath>
#include <utility>

namespace dess::ad {

Var Tape::push(Mat v, bool rg, std::function<void(Tape&, int)> back) {
    Node n;
    if (rg) n.grad = Mat::Zero(v.rows(), v.cols());
    n.val = std::move(v);
    n.rg = rg;
    n.back = rg ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Mat v, bool requires_grad) {
    return push(std::move(v), requires_grad, nullptr);
}

void Tape::backward(Var out) {
    if (v(out.i).rows() != 1 || v(out.i).cols() != 1)
        throw NumericsError("backward target must be a 1x1 scalar");
    if (!rg(out.i)) return;
    g(out.i)(0, 0) = 1.0;
    for (int i = out.i; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back(*this, i);
}

Var Tape::add(Var a, Var b) {
    bool need = rg(a.i) || rg(b.i);
    int ai = a.i, bi = b.i;
    return push(v(ai) + v(bi), need, [ai, bi](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self);
        if (t.rg(bi)) t.g(bi) += t.g(self);
    });
}

Var Tape::sub(Var a, Var b) {
    bool need = rg(a.i) || rg(b.i);
    int ai = a.i, bi = b.i;
    return push(v(ai) - v(bi), need, [ai, bi](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self);
        if (t.rg(bi)) t.g(bi) -= t.g(self);
    });
}

Var Tape::scale(Var a, double c) {
    int ai = a.i;
    return push(v(ai) * c, rg(ai), [ai, c](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += c * t.g(self);
    });
}

Var Tape::cmul(Var a, Var b) {
    bool need = rg(a.i) || rg(b.i);
    int ai = a.i, bi = b.i;
    return push(v(ai).cwiseProduct(v(bi)), need, [ai, bi](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self).cwiseProduct(t.v(bi));
        if (t.rg(bi)) t.g(bi) += t.g(self).cwiseProduct(t.v(ai));
    });
}

Var Tape::add_rowvec(Var a, Var b) {
    if (v(b.i).rows() != 1 || v(b.i).cols() != v(a.i).cols())
        throw NumericsError("add_rowvec: bias shape mismatch");
    bool need = rg(a.i) || rg(b.i);
    int ai = a.i, bi = b.i;
    Mat out = v(ai);
    out.rowwise() += v(bi).row(0);
    return push(std::move(out), need, [ai, bi](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self);
        if (t.rg(bi)) t.g(bi) += t.g(self).colwise().sum();
    });
}

Var Tape::sigmoid(Var a) {
    int ai = a.i;
    Mat out = (1.0 / (1.0 + (-v(ai).array()).exp())).matrix();
    return push(std::move(out), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        const auto& y = t.v(self).array();
        t.g(ai).array() += t.g(self).array() * y * (1.0 - y);
    });
}

Var Tape::tanh_(Var a) {
    int ai = a.i;
    return push(v(ai).array().tanh().matrix(), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        const auto& y = t.v(self).array();
        t.g(ai).array() += t.g(self).array() * (1.0 - y * y);
    });
}

Var Tape::relu(Var a) {
    int ai = a.i;
    return push(v(ai).cwiseMax(0.0), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        t.g(ai).array() += t.g(self).array() * (t.v(ai).array() > 0.0).cast<double>();
    });
}

Var Tape::softplus(Var a) {
    int ai = a.i;
    // log(1+exp(x)) computed stably
    Mat out = v(ai).unaryExpr([](double x) {
        return x > 30.0 ? x : std::log1p(std::exp(x));
    });
    return push(std::move(out), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        const auto& x = t.v(ai).array();
        t.g(ai).array() += t.g(self).array() / (1.0 + (-x).exp());
    });
}

Var Tape::exp_(Var a) {
    int ai = a.i;
    return push(v(ai).array().exp().matrix(), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        t.g(ai).array() += t.g(self).array() * t.v(self).array();
    });
}

Var Tape::matmul(Var a, Var b) {
    if (v(a.i).cols() != v(b.i).rows()) throw NumericsError("matmul: inner dim mismatch");
    bool need = rg(a.i) || rg(b.i);
    int ai = a.i, bi = b.i;
    return push(v(ai) * v(bi), need, [ai, bi](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self) * t.v(bi).transpose();
        if (t.rg(bi)) t.g(bi) += t.v(ai).transpose() * t.g(self);
    });
}

Var Tape::transpose(Var a) {
    int ai = a.i;
    return push(v(ai).transpose(), rg(ai), [ai](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self).transpose();
    });
}

Var Tape::softmax_rows(Var a, int valid) {
    int ai = a.i;
    const Mat& x = v(ai);
    int cols = static_cast<int>(x.cols());
    int n = (valid < 0 || valid > cols) ? cols : valid;
    if (n == 0) throw NumericsError("softmax_rows: no valid columns");
    Mat out = Mat::Zero(x.rows(), cols);
    for (int r = 0; r < x.rows(); ++r) {
        double mx = x.row(r).head(n).maxCoeff();
        Eigen::ArrayXd e = (x.row(r).head(n).array() - mx).exp();
        out.row(r).head(n) = (e / e.sum()).matrix();
    }
    return push(std::move(out), rg(ai), [ai, n](Tape& t, int self) {
        if (!t.rg(ai)) return;
        const Mat& y = t.v(self);
        const Mat& gy = t.g(self);
        for (int r = 0; r < y.rows(); ++r) {
            double dot = y.row(r).head(n).dot(gy.row(r).head(n));
            t.g(ai).row(r).head(n).array() +=
                y.row(r).head(n).array() * (gy.row(r).head(n).array() - dot);
        }
    });
}

Var Tape::log_softmax_rows(Var a) {
    int ai = a.i;
    const Mat& x = v(ai);
    Mat out(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        double mx = x.row(r).maxCoeff();
        double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
        out.row(r) = x.row(r).array() - lse;
    }
    return push(std::move(out), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        const Mat& ls = t.v(self);
        const Mat& gy = t.g(self);
        for (int r = 0; r < ls.rows(); ++r) {
            double gsum = gy.row(r).sum();
            t.g(ai).row(r).array() += gy.row(r).array() - gsum * ls.row(r).array().exp();
        }
    });
}

Var Tape::normalize_rows(Var a) {
    int ai = a.i;
    const Mat& x = v(ai);
    Eigen::VectorXd s = x.rowwise().sum();
    for (int r = 0; r < s.size(); ++r)
        if (s(r) <= 0.0) throw NumericsError("normalize_rows: non-positive row sum");
    Mat out = x.array().colwise() / s.array();
    return push(std::move(out), rg(ai), [ai](Tape& t, int self) {
        if (!t.rg(ai)) return;
        const Mat& y = t.v(self);
        const Mat& gy = t.g(self);
        Eigen::VectorXd s = t.v(ai).rowwise().sum();
        for (int r = 0; r < y.rows(); ++r) {
            double dot = gy.row(r).dot(y.row(r));
            t.g(ai).row(r).array() += (gy.row(r).array() - dot) / s(r);
        }
    });
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias, double eps) {
    int ai = a.i, gi = gain.i, bi = bias.i;
    const Mat& x = v(ai);
    int d = static_cast<int>(x.cols());
    Mat xhat(x.rows(), d);
    Eigen::VectorXd inv_std(x.rows());
    for (int r = 0; r < x.rows(); ++r) {
        double mu = x.row(r).mean();
        double var = (x.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
    }
    Mat out = xhat.array().rowwise() * v(gi).row(0).array();
    out.rowwise() += v(bi).row(0);
    bool need = rg(ai) || rg(gi) || rg(bi);
    // capture xhat/inv_std by value for the backward pass
    return push(std::move(out), need,
                [ai, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& t, int self) {
                    const Mat& gy = t.g(self);
                    if (t.rg(gi)) t.g(gi) += gy.cwiseProduct(xhat).colwise().sum();
                    if (t.rg(bi)) t.g(bi) += gy.colwise().sum();
                    if (!t.rg(ai)) return;
                    for (int r = 0; r < gy.rows(); ++r) {
                        Eigen::Array<double, 1, Eigen::Dynamic> dxhat =
                            gy.row(r).array() * t.v(gi).row(0).array();
                        double m1 = dxhat.mean();
                        double m2 = (dxhat * xhat.row(r).array()).mean();
                        t.g(ai).row(r).array() +=
                            inv_std(r) * (dxhat - m1 - xhat.row(r).array() * m2);
                    }
                });
}

Var Tape::concat_cols(Var a, Var b) {
    if (v(a.i).rows() != v(b.i).rows()) throw NumericsError("concat_cols: row mismatch");
    bool need = rg(a.i) || rg(b.i);
    int ai = a.i, bi = b.i;
    int ca = static_cast<int>(v(ai).cols()), cb = static_cast<int>(v(bi).cols());
    Mat out(v(ai).rows(), ca + cb);
    out.leftCols(ca) = v(ai);
    out.rightCols(cb) = v(bi);
    return push(std::move(out), need, [ai, bi, ca, cb](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai) += t.g(self).leftCols(ca);
        if (t.rg(bi)) t.g(bi) += t.g(self).rightCols(cb);
    });
}

Var Tape::slice_cols(Var a, int start, int n) {
    int ai = a.i;
    return push(v(ai).middleCols(start, n), rg(ai), [ai, start, n](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai).middleCols(start, n) += t.g(self);
    });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw NumericsError("concat_rows: empty");
    bool need = false;
    int rows = 0;
    int cols = static_cast<int>(v(parts[0].i).cols());
    for (Var p : parts) {
        need = need || rg(p.i);
        rows += static_cast<int>(v(p.i).rows());
    }
    Mat out(rows, cols);
    int r = 0;
    std::vector<int> idx;
    std::vector<int> offs;
    for (Var p : parts) {
        int nr = static_cast<int>(v(p.i).rows());
        out.middleRows(r, nr) = v(p.i);
        idx.push_back(p.i);
        offs.push_back(r);
        r += nr;
    }
    return push(std::move(out), need,
                [idx = std::move(idx), offs = std::move(offs)](Tape& t, int self) {
                    for (std::size_t k = 0; k < idx.size(); ++k) {
                        if (!t.rg(idx[k])) continue;
                        int nr = static_cast<int>(t.v(idx[k]).rows());
                        t.g(idx[k]) += t.g(self).middleRows(offs[k], nr);
                    }
                });
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
    int ai = a.i;
    Mat out(static_cast<int>(idx.size()), v(ai).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= v(ai).rows())
            throw NumericsError("gather_rows: index out of range");
        out.row(static_cast<int>(r)) = v(ai).row(idx[r]);
    }
    return push(std::move(out), rg(ai), [ai, idx = std::move(idx)](Tape& t, int self) {
        if (!t.rg(ai)) return;
        for (std::size_t r = 0; r < idx.size(); ++r)
            t.g(ai).row(idx[r]) += t.g(self).row(static_cast<int>(r));
    });
}

Var Tape::mean_rows(Var a, int first, int last) {
    int ai = a.i;
    if (first < 0 || last >= v(ai).rows() || first > last)
        throw NumericsError("mean_rows: bad range");
    int n = last - first + 1;
    Mat out = v(ai).middleRows(first, n).colwise().mean();
    return push(std::move(out), rg(ai), [ai, first, n](Tape& t, int self) {
        if (!t.rg(ai)) return;
        for (int r = 0; r < n; ++r)
            t.g(ai).row(first + r) += t.g(self).row(0) / static_cast<double>(n);
    });
}

Var Tape::gather_entries(Var a, MatI rows, MatI cols) {
    if (rows.rows() != cols.rows() || rows.cols() != cols.cols())
        throw NumericsError("gather_entries: index shape mismatch");
    int ai = a.i;
    Mat out(rows.rows(), rows.cols());
    for (int r = 0; r < rows.rows(); ++r)
        for (int c = 0; c < rows.cols(); ++c)
            out(r, c) = v(ai)(rows(r, c), cols(r, c));
    return push(std::move(out), rg(ai),
                [ai, rows = std::move(rows), cols = std::move(cols)](Tape& t, int self) {
                    if (!t.rg(ai)) return;
                    const Mat& gy = t.g(self);
                    for (int r = 0; r < rows.rows(); ++r)
                        for (int c = 0; c < rows.cols(); ++c)
                            t.g(ai)(rows(r, c), cols(r, c)) += gy(r, c);
                });
}

Var Tape::sum_all(Var a) {
    int ai = a.i;
    Mat out(1, 1);
    out(0, 0) = v(ai).sum();
    return push(std::move(out), rg(ai), [ai](Tape& t, int self) {
        if (t.rg(ai)) t.g(ai).array() += t.g(self)(0, 0);
    });
}

Var Tape::mean_all(Var a) {
    double n = static_cast<double>(v(a.i).size());
    return scale(sum_all(a), 1.0 / n);
}

Var Tape::cross_entropy_rows(Var logits, std::vector<int> labels) {
    int ai = logits.i;
    const Mat& x = v(ai);
    if (static_cast<int>(labels.size()) != x.rows())
        throw NumericsError("cross_entropy_rows: label count mismatch");
    if (labels.empty()) throw NumericsError("cross_entropy_rows: empty sample set");
    double total = 0.0;
    for (int r = 0; r < x.rows(); ++r) {
        if (labels[r] < 0 || labels[r] >= x.cols())
            throw NumericsError("cross_entropy_rows: label out of range");
        double mx = x.row(r).maxCoeff();
        double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
        total += lse - x(r, labels[r]);
    }
    Mat out(1, 1);
    out(0, 0) = total / x.rows();
    return push(std::move(out), rg(ai),
                [ai, labels = std::move(labels)](Tape& t, int self) {
                    if (!t.rg(ai)) return;
                    const Mat& x = t.v(ai);
                    double gscale = t.g(self)(0, 0) / x.rows();
                    for (int r = 0; r < x.rows(); ++r) {
                        double mx = x.row(r).maxCoeff();
                        Eigen::ArrayXd p = (x.row(r).array() - mx).exp();
                        p /= p.sum();
                        t.g(ai).row(r).array() += gscale * p.transpose();
                        t.g(ai)(r, labels[r]) -= gscale;
                    }
                });
}

Var Tape::dropout(Var a, double rate, bool train, std::mt19937_64& rng) {
    if (!train || rate <= 0.0) return a;
    const Mat& x = v(a.i);
    Mat mask(x.rows(), x.cols());
    double keep = 1.0 - rate;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < x.cols(); ++c)
            mask(r, c) = u(rng) < keep ? 1.0 / keep : 0.0;
    return cmul(a, constant(std::move(mask)));
}

void Tape::check_finite(Var a, const std::string& where) const {
    if (!v(a.i).allFinite())
        throw NumericsError("non-finite activation in " + where);
}

}  // namespace dess::ad
