#pragma once

#include <random>
#include <string>
#include <vector>

#include "dess/ad.hpp"
#include "dess/encoder.hpp"
#include "dess/params.hpp"

namespace dess {

struct GcnConfig {
    int hidden_dim = 384;
    int num_layers = 2;
    double dropout_rate = 0.3;
    Activation activation = Activation::Relu;

    void validate() const;
};

/// Registers input projection (in_dim -> hidden) plus per-layer weights
/// under `prefix` (e.g. "gcn_syn.").
void register_gcn_params(ParamStore& store, const std::string& prefix, int in_dim,
                         const GcnConfig& cfg, std::mt19937_64& rng);

/// Per layer: H' = act(rownorm(A) H W + b). Input projected before layer 1.
ad::Var gcn_forward(Binding& bind, const std::string& prefix, const GcnConfig& cfg,
                    ad::Var features, ad::Var adjacency, bool train,
                    std::mt19937_64& drop_rng);

/// Mean over all heads of the final encoder layer; rows sum to 1.
ad::Var semantic_adjacency(ad::Tape& t, const std::vector<std::vector<ad::Var>>& maps);

}  // namespace dess
