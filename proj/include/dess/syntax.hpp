#pragma once

#include <random>
#include <string>

#include "dess/ad.hpp"
#include "dess/corpus.hpp"
#include "dess/params.hpp"

namespace dess {

struct LstmConfig {
    int num_layers = 2;
    int hidden_per_direction = 384;
    double dropout_rate = 0.5;
    int input_dim = 768;

    int output_dim() const { return 2 * hidden_per_direction; }
    void validate() const;
};

void register_lstm_params(ParamStore& store, const LstmConfig& cfg, std::mt19937_64& rng);

/// Two-layer BiLSTM; forward/backward states concatenated per position.
/// Inter-layer dropout only, active in train mode.
ad::Var bilstm_encode(Binding& bind, const LstmConfig& cfg, ad::Var embeddings,
                      bool train, std::mt19937_64& drop_rng);

/// Undirected dependency adjacency with self-loops; falls back to a
/// linear chain when the sentence has no dependency heads.
ad::Mat build_dep_adjacency(const Sentence& sentence);

}  // namespace dess
