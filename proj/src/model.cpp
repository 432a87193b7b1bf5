#include "dess/model.hpp"

#include <map>
#include <stdexcept>

namespace dess {

void ModelConfig::finalize() {
    lstm.input_dim = encoder.hidden_dim;
    head.token_dim = 2 * gcn.hidden_dim;
    encoder.validate();
    lstm.validate();
    gcn.validate();
    head.validate();
}

void ModelConfig::set_activation(Activation a) {
    encoder.activation = a;
    gcn.activation = a;
    head.activation = a;
}

ModelConfig toy_model_config(int vocab_size) {
    ModelConfig cfg;
    cfg.encoder = EncoderConfig{vocab_size, 64, 4, 2, 8, 128, 0.0, 128};
    cfg.lstm = LstmConfig{1, 32, 0.0, 64};
    cfg.gcn = GcnConfig{64, 2, 0.0};
    cfg.head = HeadConfig{8, 10, 10, 100, 8, 128, 128};
    cfg.lambda_kl = 0.1;
    cfg.finalize();
    return cfg;
}

ModelConfig base_model_config(int vocab_size) {
    ModelConfig cfg;
    cfg.encoder = EncoderConfig{vocab_size, 768, 12, 12, 64, 3072, 0.1, 128};
    cfg.lstm = LstmConfig{2, 384, 0.5, 768};
    cfg.gcn = GcnConfig{384, 2, 0.3};
    cfg.head = HeadConfig{8, 50, 50, 100, 25, 768, 768};
    cfg.lambda_kl = 0.1;
    cfg.finalize();
    return cfg;
}

ModelConfig large_model_config(int vocab_size) {
    ModelConfig cfg = base_model_config(vocab_size);
    cfg.encoder.hidden_dim = 1024;
    cfg.encoder.num_heads = 16;
    cfg.encoder.num_layers = 24;
    cfg.encoder.ffn_dim = 4096;
    cfg.finalize();
    return cfg;
}

ModelConfig xxlarge_model_config(int vocab_size) {
    ModelConfig cfg = base_model_config(vocab_size);
    cfg.encoder.hidden_dim = 1536;
    cfg.encoder.num_heads = 24;
    cfg.encoder.num_layers = 48;
    cfg.encoder.ffn_dim = 6144;
    cfg.finalize();
    return cfg;
}

void register_model_params(ParamStore& store, const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    register_encoder_params(store, cfg.encoder, rng);
    register_lstm_params(store, cfg.lstm, rng);
    register_gcn_params(store, "gcn_syn.", cfg.lstm.output_dim(), cfg.gcn, rng);
    register_gcn_params(store, "gcn_sem.", cfg.encoder.hidden_dim, cfg.gcn, rng);
    register_fusion_params(store, cfg.gcn.hidden_dim, rng);
    store.add_uniform("proj_sem", cfg.encoder.hidden_dim, cfg.gcn.hidden_dim, rng);
    register_head_params(store, cfg.head, rng);
}

ModelForward model_forward(Binding& bind, const ModelConfig& cfg,
                           const std::vector<int>& ids, const ad::Mat& dep_adj,
                           bool train, std::mt19937_64& drop_rng) {
    ad::Tape& t = bind.tape();
    int seq = static_cast<int>(ids.size());
    if (dep_adj.rows() != seq || dep_adj.cols() != seq)
        throw std::invalid_argument("dependency adjacency shape mismatch");

    ModelForward out;
    out.enc = encode(bind, cfg.encoder, ids, train, drop_rng);

    ad::Var emb = t.gather_rows(bind("encoder.embed"), ids);
    ad::Var lstm_out = bilstm_encode(bind, cfg.lstm, emb, train, drop_rng);
    out.h_syn = gcn_forward(bind, "gcn_syn.", cfg.gcn, lstm_out,
                            t.constant(dep_adj), train, drop_rng);

    ad::Var sem_adj = semantic_adjacency(t, out.enc.attention);
    out.h_sem = gcn_forward(bind, "gcn_sem.", cfg.gcn, out.enc.features, sem_adj,
                            train, drop_rng);

    ad::Var fused = fuse(bind, out.h_syn, out.h_sem);
    ad::Var projected = t.matmul(out.enc.features, bind("proj_sem"));
    out.token_features = t.concat_cols(fused, projected);
    return out;
}

ad::Var sentence_loss(Binding& bind, const ModelConfig& cfg, const ModelForward& fwd,
                      const std::vector<Span>& all_spans, const NegativeSamples& samples) {
    ad::Tape& t = bind.tape();
    if (samples.entities.empty())
        throw std::invalid_argument("sentence_loss: empty entity sample set");

    // unique span indices needed by either sample set
    std::map<int, int> row_of;
    std::vector<Span> cand;
    auto need = [&](int span_idx) {
        auto [it, inserted] = row_of.emplace(span_idx, static_cast<int>(cand.size()));
        if (inserted) cand.push_back(all_spans.at(span_idx));
        return it->second;
    };
    std::vector<int> entity_rows;
    std::vector<int> entity_labels;
    for (const EntitySample& e : samples.entities) {
        entity_rows.push_back(need(e.span_index));
        entity_labels.push_back(static_cast<int>(e.label));
    }
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> pair_labels;
    for (const PairSample& p : samples.pairs) {
        pairs.emplace_back(need(p.aspect_index), need(p.opinion_index));
        pair_labels.push_back(static_cast<int>(p.label));
    }

    ad::Var reps = span_representations(bind, cfg.head, fwd.token_features, cand);
    ad::Var entity_logits = t.gather_rows(score_entities(bind, cfg.head, reps), entity_rows);
    ad::Var loss = t.cross_entropy_rows(entity_logits, entity_labels);

    if (!pairs.empty()) {
        PairBatch pb = score_pairs(bind, cfg.head, fwd.token_features, reps, cand, pairs);
        loss = t.add(loss, t.cross_entropy_rows(pb.logits, pair_labels));
    }
    if (cfg.lambda_kl != 0.0)
        loss = t.add(loss, t.scale(channel_kl(t, fwd.h_syn, fwd.h_sem), cfg.lambda_kl));
    return loss;
}

SentencePrediction predict_sentence(Binding& bind, const ModelConfig& cfg,
                                    const std::vector<int>& ids, const ad::Mat& dep_adj) {
    ad::Tape& t = bind.tape();
    std::mt19937_64 no_drop(0);
    ModelForward fwd = model_forward(bind, cfg, ids, dep_adj, false, no_drop);

    SentencePrediction out;
    out.spans = enumerate_spans(static_cast<int>(ids.size()), cfg.head.max_span);
    if (out.spans.empty()) {
        out.entity_logits = ad::Mat::Zero(0, 3);
        return out;
    }
    ad::Var reps = span_representations(bind, cfg.head, fwd.token_features, out.spans);
    out.entity_logits = t.val(score_entities(bind, cfg.head, reps));

    EntitySelection sel = select_entities(out.entity_logits, out.spans);
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < out.spans.size(); ++i) {
        if (!sel.kept[i] || sel.label[i] != 1) continue;
        for (std::size_t j = 0; j < out.spans.size(); ++j) {
            if (!sel.kept[j] || sel.label[j] != 2) continue;
            if (out.spans[i].overlaps(out.spans[j])) continue;
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    pairs = cap_pairs(pairs, sel.conf, cfg.head.max_pairs);
    PairBatch pb = score_pairs(bind, cfg.head, fwd.token_features, reps, out.spans, pairs);
    out.triplets = decode_triplets(out.entity_logits, t.val(pb.logits), out.spans, pairs);
    return out;
}

ad::Mat attention_matrix(ParamStore& store, const ModelConfig& cfg,
                         const std::vector<int>& ids, int layer, int head) {
    ad::Tape t;
    Binding bind(t, store);
    std::mt19937_64 no_drop(0);
    EncodeOut enc = encode(bind, cfg.encoder, ids, false, no_drop);
    int L = static_cast<int>(enc.attention.size());
    if (layer < 0) layer += L;
    if (layer < 0 || layer >= L) throw std::invalid_argument("attention layer out of range");
    const auto& heads = enc.attention[layer];
    int H = static_cast<int>(heads.size());
    if (head >= H) throw std::invalid_argument("attention head out of range");
    if (head >= 0) return t.val(heads[head]);
    ad::Mat mean = t.val(heads[0]);
    for (int h = 1; h < H; ++h) mean += t.val(heads[h]);
    return mean / H;
}

}  // namespace dess
