#pragma once

#include <random>

#include "dess/ad.hpp"
#include "dess/params.hpp"

namespace dess {

void register_fusion_params(ParamStore& store, int channel_dim, std::mt19937_64& rng);

/// Sigmoid-gated convex combination of the two channel features:
/// g = sigmoid(W [h_syn ; h_sem] + b), out = g*h_syn + (1-g)*h_sem.
ad::Var fuse(Binding& bind, ad::Var h_syn, ad::Var h_sem);

/// Mean over tokens of KL(softmax(h_sem) || softmax(h_syn)); >= 0,
/// zero iff the per-token softmaxes coincide.
ad::Var channel_kl(ad::Tape& t, ad::Var h_syn, ad::Var h_sem);

}  // namespace dess
