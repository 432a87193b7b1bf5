#include "dess/graph.hpp"

#include <stdexcept>

namespace dess {

void GcnConfig::validate() const {
    if (hidden_dim < 1 || num_layers < 1)
        throw std::invalid_argument("gcn dims must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("gcn dropout must be in [0,1)");
}

void register_gcn_params(ParamStore& store, const std::string& prefix, int in_dim,
                         const GcnConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    store.add_uniform(prefix + "proj", in_dim, cfg.hidden_dim, rng);
    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string p = prefix + "l" + std::to_string(l) + ".";
        store.add_uniform(p + "w", cfg.hidden_dim, cfg.hidden_dim, rng);
        store.add_zeros(p + "b", 1, cfg.hidden_dim);
    }
}

ad::Var gcn_forward(Binding& bind, const std::string& prefix, const GcnConfig& cfg,
                    ad::Var features, ad::Var adjacency, bool train,
                    std::mt19937_64& drop_rng) {
    ad::Tape& t = bind.tape();
    ad::Var a = t.normalize_rows(adjacency);
    ad::Var x = t.matmul(features, bind(prefix + "proj"));
    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string p = prefix + "l" + std::to_string(l) + ".";
        ad::Var z = t.add_rowvec(t.matmul(t.matmul(a, x), bind(p + "w")), bind(p + "b"));
        x = cfg.activation == Activation::Relu ? t.relu(z) : t.softplus(z);
        x = t.dropout(x, cfg.dropout_rate, train, drop_rng);
    }
    t.check_finite(x, prefix + "output");
    return x;
}

ad::Var semantic_adjacency(ad::Tape& t, const std::vector<std::vector<ad::Var>>& maps) {
    if (maps.empty() || maps.back().empty())
        throw std::invalid_argument("semantic_adjacency: no attention maps");
    const std::vector<ad::Var>& last = maps.back();
    ad::Var sum = last[0];
    for (std::size_t h = 1; h < last.size(); ++h) sum = t.add(sum, last[h]);
    return t.scale(sum, 1.0 / static_cast<double>(last.size()));
}

}  // namespace dess
