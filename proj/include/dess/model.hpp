#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "dess/encoder.hpp"
#include "dess/graph.hpp"
#include "dess/head.hpp"
#include "dess/hfim.hpp"
#include "dess/syntax.hpp"

namespace dess {

struct ModelConfig {
    EncoderConfig encoder;
    LstmConfig lstm;
    GcnConfig gcn;
    HeadConfig head;
    double lambda_kl = 0.1;

    /// Closes the dimension plan: the BiLSTM shares the encoder embedding,
    /// both GCNs emit gcn.hidden_dim, the head consumes fused + projected
    /// encoder features (2 * gcn.hidden_dim per token).
    void finalize();
    void set_activation(Activation a);
};

ModelConfig toy_model_config(int vocab_size);
ModelConfig base_model_config(int vocab_size);   // v3-base shape
ModelConfig large_model_config(int vocab_size);  // v3-large shape
ModelConfig xxlarge_model_config(int vocab_size);

void register_model_params(ParamStore& store, const ModelConfig& cfg, std::uint64_t seed);

struct ModelForward {
    EncodeOut enc;
    ad::Var h_syn;            // seq x gcn.hidden_dim
    ad::Var h_sem;            // seq x gcn.hidden_dim
    ad::Var token_features;   // seq x head.token_dim
};

ModelForward model_forward(Binding& bind, const ModelConfig& cfg,
                           const std::vector<int>& ids, const ad::Mat& dep_adj,
                           bool train, std::mt19937_64& drop_rng);

/// Entity CE + pair CE + lambda_kl * channel KL over the sampled sets.
ad::Var sentence_loss(Binding& bind, const ModelConfig& cfg, const ModelForward& fwd,
                      const std::vector<Span>& all_spans, const NegativeSamples& samples);

struct SentencePrediction {
    std::set<Triplet> triplets;
    ad::Mat entity_logits;
    std::vector<Span> spans;
};

SentencePrediction predict_sentence(Binding& bind, const ModelConfig& cfg,
                                    const std::vector<int>& ids, const ad::Mat& dep_adj);

/// Attention matrix for one sentence in eval mode. layer -1 = last;
/// head -1 = mean over heads.
ad::Mat attention_matrix(ParamStore& store, const ModelConfig& cfg,
                         const std::vector<int>& ids, int layer, int head);

}  // namespace dess
