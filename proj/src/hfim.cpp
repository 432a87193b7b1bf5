#include "dess/hfim.hpp"

#include <stdexcept>

namespace dess {

void register_fusion_params(ParamStore& store, int channel_dim, std::mt19937_64& rng) {
    store.add_uniform("hfim.w", 2 * channel_dim, channel_dim, rng);
    store.add_zeros("hfim.b", 1, channel_dim);
}

ad::Var fuse(Binding& bind, ad::Var h_syn, ad::Var h_sem) {
    ad::Tape& t = bind.tape();
    // copy shapes: val() references go stale once new nodes are pushed
    Eigen::Index rows = t.val(h_syn).rows(), cols = t.val(h_syn).cols();
    if (t.val(h_sem).rows() != rows || t.val(h_sem).cols() != cols)
        throw std::invalid_argument("fuse: channel shape mismatch");
    ad::Var cat = t.concat_cols(h_syn, h_sem);
    ad::Var gate = t.sigmoid(t.add_rowvec(t.matmul(cat, bind("hfim.w")), bind("hfim.b")));
    ad::Var ones = t.constant(ad::Mat::Ones(rows, cols));
    return t.add(t.cmul(gate, h_syn), t.cmul(t.sub(ones, gate), h_sem));
}

ad::Var channel_kl(ad::Tape& t, ad::Var h_syn, ad::Var h_sem) {
    Eigen::Index rows = t.val(h_syn).rows();
    if (t.val(h_sem).rows() != rows || t.val(h_sem).cols() != t.val(h_syn).cols())
        throw std::invalid_argument("channel_kl: shape mismatch");
    ad::Var lp = t.log_softmax_rows(h_sem);
    ad::Var lq = t.log_softmax_rows(h_syn);
    ad::Var p = t.exp_(lp);
    ad::Var per_entry = t.cmul(p, t.sub(lp, lq));
    // sum over dims, mean over tokens
    return t.scale(t.sum_all(per_entry), 1.0 / static_cast<double>(rows));
}

}  // namespace dess
