#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "dess/params.hpp"

namespace dess::testing {

// Builds the scalar loss on a fresh tape from the current store values.
using LossFn = std::function<ad::Var(ad::Tape&, Binding&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t checked = 0;
};

/// Central finite differences over every scalar of every tensor in the
/// store, compared against reverse-mode gradients.
inline GradCheckResult gradient_check(ParamStore& store, const LossFn& build,
                                      double eps = 1e-5) {
    std::vector<ad::Mat> analytic = store.zero_grads();
    {
        ad::Tape t;
        Binding bind(t, store);
        ad::Var loss = build(t, bind);
        t.backward(loss);
        bind.accumulate_grads(analytic);
    }
    auto eval = [&]() {
        ad::Tape t;
        Binding bind(t, store);
        return t.val(build(t, bind))(0, 0);
    };

    GradCheckResult res;
    for (std::size_t p = 0; p < store.size(); ++p) {
        ad::Mat& w = store.entry(static_cast<int>(p)).value;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                double orig = w(r, c);
                w(r, c) = orig + eps;
                double up = eval();
                w(r, c) = orig - eps;
                double down = eval();
                w(r, c) = orig;
                double numeric = (up - down) / (2.0 * eps);
                double a = analytic[p](r, c);
                double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
                double rel = std::abs(a - numeric) / denom;
                if (std::abs(a - numeric) <= 1e-8) rel = 0.0;  // both ~zero
                if (rel > res.max_rel_err) {
                    res.max_rel_err = rel;
                    res.worst_param = store.entry(static_cast<int>(p)).name;
                }
                ++res.checked;
            }
        }
    }
    return res;
}

}  // namespace dess::testing
