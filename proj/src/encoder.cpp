#include "dess/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace dess {

void EncoderConfig::validate() const {
    if (hidden_dim % num_heads != 0)
        throw std::invalid_argument("hidden_dim must be divisible by num_heads");
    if (max_rel_distance < 1) throw std::invalid_argument("max_rel_distance must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("dropout_rate must be in [0,1)");
}

int relative_position_bucket(int i, int j, int k) {
    int d = i - j;
    if (d < -k) d = -k;
    if (d > k - 1) d = k - 1;
    return d + k;
}

void register_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                             std::mt19937_64& rng) {
    cfg.validate();
    int h = cfg.hidden_dim;
    store.add_uniform("encoder.embed", cfg.vocab_size, h, rng);
    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string p = "encoder.l" + std::to_string(l) + ".";
        store.add_uniform(p + "attn.wq", h, h, rng);
        store.add_uniform(p + "attn.wk", h, h, rng);
        store.add_uniform(p + "attn.wv", h, h, rng);
        store.add_zeros(p + "attn.bq", 1, h);
        store.add_zeros(p + "attn.bk", 1, h);
        store.add_zeros(p + "attn.bv", 1, h);
        store.add_uniform(p + "attn.wo", h, h, rng);
        store.add_zeros(p + "attn.bo", 1, h);
        store.add_uniform(p + "attn.rel", 2 * cfg.max_rel_distance, h, rng);
        store.add_ones(p + "ln1.gain", 1, h);
        store.add_zeros(p + "ln1.bias", 1, h);
        store.add_uniform(p + "ffn.w1", h, cfg.ffn_dim, rng);
        store.add_zeros(p + "ffn.b1", 1, cfg.ffn_dim);
        store.add_uniform(p + "ffn.w2", cfg.ffn_dim, h, rng);
        store.add_zeros(p + "ffn.b2", 1, h);
        store.add_ones(p + "ln2.gain", 1, h);
        store.add_zeros(p + "ln2.bias", 1, h);
    }
}

AttentionOut disentangled_attention(Binding& bind, const std::string& prefix,
                                    const EncoderConfig& cfg, ad::Var h,
                                    bool train, std::mt19937_64& drop_rng,
                                    int valid_len) {
    ad::Tape& t = bind.tape();
    int seq = static_cast<int>(t.val(h).rows());
    int dh = cfg.head_dim();
    int k = cfg.max_rel_distance;
    if (valid_len < 0 || valid_len > seq) valid_len = seq;

    ad::Var q = t.add_rowvec(t.matmul(h, bind(prefix + "attn.wq")), bind(prefix + "attn.bq"));
    ad::Var kc = t.add_rowvec(t.matmul(h, bind(prefix + "attn.wk")), bind(prefix + "attn.bk"));
    ad::Var vc = t.add_rowvec(t.matmul(h, bind(prefix + "attn.wv")), bind(prefix + "attn.bv"));
    // relative-position table shared across heads, projected through the
    // same content projections (no bias, so zero tables give standard attention)
    ad::Var rel = bind(prefix + "attn.rel");
    ad::Var kr = t.matmul(rel, bind(prefix + "attn.wk"));
    ad::Var qr = t.matmul(rel, bind(prefix + "attn.wq"));

    ad::MatI idx_i(seq, seq), bucket_ij(seq, seq), idx_j(seq, seq), bucket_ji(seq, seq);
    for (int i = 0; i < seq; ++i) {
        for (int j = 0; j < seq; ++j) {
            idx_i(i, j) = i;
            idx_j(i, j) = j;
            bucket_ij(i, j) = relative_position_bucket(i, j, k);
            bucket_ji(i, j) = relative_position_bucket(j, i, k);
        }
    }

    double inv_temp = 1.0 / std::sqrt(3.0 * dh);
    std::vector<ad::Var> head_outs;
    std::vector<ad::Var> head_maps;
    for (int hh = 0; hh < cfg.num_heads; ++hh) {
        ad::Var qh = t.slice_cols(q, hh * dh, dh);
        ad::Var kh = t.slice_cols(kc, hh * dh, dh);
        ad::Var vh = t.slice_cols(vc, hh * dh, dh);
        ad::Var krh = t.slice_cols(kr, hh * dh, dh);
        ad::Var qrh = t.slice_cols(qr, hh * dh, dh);

        ad::Var c2c = t.matmul(qh, t.transpose(kh));                        // seq x seq
        ad::Var c2p = t.gather_entries(t.matmul(qh, t.transpose(krh)),      // via seq x 2k
                                       idx_i, bucket_ij);
        ad::Var p2c = t.gather_entries(t.matmul(kh, t.transpose(qrh)),
                                       idx_j, bucket_ji);
        ad::Var score = t.scale(t.add(t.add(c2c, c2p), p2c), inv_temp);
        ad::Var probs = t.softmax_rows(score, valid_len);
        t.check_finite(probs, prefix + "attn head " + std::to_string(hh));
        head_maps.push_back(probs);
        ad::Var mixed = t.matmul(t.dropout(probs, cfg.dropout_rate, train, drop_rng), vh);
        head_outs.push_back(mixed);
    }
    ad::Var cat = head_outs[0];
    for (std::size_t i = 1; i < head_outs.size(); ++i)
        cat = t.concat_cols(cat, head_outs[i]);
    ad::Var out = t.add_rowvec(t.matmul(cat, bind(prefix + "attn.wo")),
                               bind(prefix + "attn.bo"));
    return {out, std::move(head_maps)};
}

namespace {

ad::Var activation(ad::Tape& t, Activation a, ad::Var x) {
    return a == Activation::Relu ? t.relu(x) : t.softplus(x);
}

}  // namespace

EncodeOut encode(Binding& bind, const EncoderConfig& cfg, const std::vector<int>& ids,
                 bool train, std::mt19937_64& drop_rng, int valid_len) {
    ad::Tape& t = bind.tape();
    if (static_cast<int>(ids.size()) > cfg.max_len)
        throw std::invalid_argument("sequence exceeds max_len");
    for (int id : ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw std::invalid_argument("token id out of vocabulary range");

    ad::Var x = t.gather_rows(bind("encoder.embed"), ids);
    EncodeOut out;
    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string p = "encoder.l" + std::to_string(l) + ".";
        AttentionOut att = disentangled_attention(bind, p, cfg, x, train, drop_rng, valid_len);
        x = t.layer_norm_rows(t.add(x, att.features), bind(p + "ln1.gain"),
                              bind(p + "ln1.bias"));
        ad::Var ff = t.add_rowvec(t.matmul(x, bind(p + "ffn.w1")), bind(p + "ffn.b1"));
        ff = activation(t, cfg.activation, ff);
        ff = t.add_rowvec(t.matmul(ff, bind(p + "ffn.w2")), bind(p + "ffn.b2"));
        ff = t.dropout(ff, cfg.dropout_rate, train, drop_rng);
        x = t.layer_norm_rows(t.add(x, ff), bind(p + "ln2.gain"), bind(p + "ln2.bias"));
        out.attention.push_back(std::move(att.head_maps));
    }
    out.features = x;
    return out;
}

}  // namespace dess
