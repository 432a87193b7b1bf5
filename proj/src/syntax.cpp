#include "dess/syntax.hpp"

#include <stdexcept>

namespace dess {

void LstmConfig::validate() const {
    if (num_layers < 1 || hidden_per_direction < 1 || input_dim < 1)
        throw std::invalid_argument("lstm dims must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("lstm dropout must be in [0,1)");
}

void register_lstm_params(ParamStore& store, const LstmConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    int h = cfg.hidden_per_direction;
    for (int l = 0; l < cfg.num_layers; ++l) {
        int in = l == 0 ? cfg.input_dim : 2 * h;
        for (const char* dir : {"fwd", "bwd"}) {
            std::string p = "lstm.l" + std::to_string(l) + "." + dir + ".";
            store.add_uniform(p + "wx", in, 4 * h, rng);
            store.add_uniform(p + "wh", h, 4 * h, rng);
            store.add_zeros(p + "b", 1, 4 * h);
        }
    }
}

namespace {

// One direction over the sequence; returns seq x hidden.
ad::Var lstm_direction(Binding& bind, const std::string& prefix, int hidden,
                       ad::Var input, bool reverse) {
    ad::Tape& t = bind.tape();
    int seq = static_cast<int>(t.val(input).rows());
    ad::Var wx = bind(prefix + "wx");
    ad::Var wh = bind(prefix + "wh");
    ad::Var b = bind(prefix + "b");

    ad::Var h = t.zeros(1, hidden);
    ad::Var c = t.zeros(1, hidden);
    std::vector<ad::Var> outputs(seq);
    for (int step = 0; step < seq; ++step) {
        int pos = reverse ? seq - 1 - step : step;
        ad::Var x = t.gather_rows(input, {pos});
        ad::Var gates =
            t.add_rowvec(t.add(t.matmul(x, wx), t.matmul(h, wh)), b);
        ad::Var ig = t.sigmoid(t.slice_cols(gates, 0, hidden));
        ad::Var fg = t.sigmoid(t.slice_cols(gates, hidden, hidden));
        ad::Var gg = t.tanh_(t.slice_cols(gates, 2 * hidden, hidden));
        ad::Var og = t.sigmoid(t.slice_cols(gates, 3 * hidden, hidden));
        c = t.add(t.cmul(fg, c), t.cmul(ig, gg));
        h = t.cmul(og, t.tanh_(c));
        outputs[pos] = h;
    }
    return t.concat_rows(outputs);
}

}  // namespace

ad::Var bilstm_encode(Binding& bind, const LstmConfig& cfg, ad::Var embeddings,
                      bool train, std::mt19937_64& drop_rng) {
    ad::Tape& t = bind.tape();
    t.check_finite(embeddings, "bilstm input");
    ad::Var x = embeddings;
    for (int l = 0; l < cfg.num_layers; ++l) {
        if (l > 0) x = t.dropout(x, cfg.dropout_rate, train, drop_rng);
        std::string p = "lstm.l" + std::to_string(l) + ".";
        ad::Var fwd = lstm_direction(bind, p + "fwd.", cfg.hidden_per_direction, x, false);
        ad::Var bwd = lstm_direction(bind, p + "bwd.", cfg.hidden_per_direction, x, true);
        x = t.concat_cols(fwd, bwd);
    }
    t.check_finite(x, "bilstm output");
    return x;
}

ad::Mat build_dep_adjacency(const Sentence& sentence) {
    int n = static_cast<int>(sentence.tokens.size());
    ad::Mat a = ad::Mat::Identity(n, n);
    if (sentence.dep_heads) {
        if (static_cast<int>(sentence.dep_heads->size()) != n)
            throw ValidationError("dep_heads length does not match token count");
        for (int i = 0; i < n; ++i) {
            int h = (*sentence.dep_heads)[i];
            if (h == -1) continue;  // root
            if (h < 0 || h >= n || h == i)
                throw ValidationError("invalid dependency head index");
            a(i, h) = 1.0;
            a(h, i) = 1.0;
        }
    } else {
        for (int i = 0; i + 1 < n; ++i) {
            a(i, i + 1) = 1.0;
            a(i + 1, i) = 1.0;
        }
    }
    return a;
}

}  // namespace dess
