#pragma once

#include <random>
#include <vector>

#include "dess/ad.hpp"
#include "dess/params.hpp"

namespace dess {

enum class Activation { Relu, Softplus };

struct EncoderConfig {
    int vocab_size = 0;
    int hidden_dim = 64;
    int num_heads = 4;
    int num_layers = 2;
    int max_rel_distance = 8;  // bucket half-window k
    int ffn_dim = 128;
    double dropout_rate = 0.0;
    int max_len = 128;
    Activation activation = Activation::Relu;

    int head_dim() const { return hidden_dim / num_heads; }
    void validate() const;
};

/// clamp(i - j, -k, k-1) + k, in [0, 2k)
int relative_position_bucket(int i, int j, int k);

struct AttentionOut {
    ad::Var features;
    std::vector<ad::Var> head_maps;  // pre-dropout row-stochastic seq x seq
};

struct EncodeOut {
    ad::Var features;                              // seq x hidden
    std::vector<std::vector<ad::Var>> attention;   // [layer][head]
};

void register_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                             std::mt19937_64& rng);

/// One disentangled multi-head attention block (scores + softmax + value
/// mix + output projection), without residual/norm. valid_len < 0 means
/// every position is valid.
AttentionOut disentangled_attention(Binding& bind, const std::string& prefix,
                                    const EncoderConfig& cfg, ad::Var h,
                                    bool train, std::mt19937_64& drop_rng,
                                    int valid_len = -1);

EncodeOut encode(Binding& bind, const EncoderConfig& cfg, const std::vector<int>& ids,
                 bool train, std::mt19937_64& drop_rng, int valid_len = -1);

}  // namespace dess
