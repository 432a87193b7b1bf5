#include "dess/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace dess {

void TrainConfig::validate() const {
    if (lr_encoder <= 0.0 || lr_other <= 0.0)
        throw std::invalid_argument("learning rates must be positive");
    if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
        throw std::invalid_argument("warmup_ratio must be in [0,1)");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (max_grad_norm <= 0.0) throw std::invalid_argument("max_grad_norm must be positive");
}

TrainConfig train_preset(const std::string& name) {
    TrainConfig c;
    if (name == "paper-main") {
        // lr 2e-5 / 1e-4, warmup 0.1, batch 8, 120 epochs
        c.lr_encoder = 2e-5;
        c.lr_other = 1e-4;
        c.warmup_ratio = 0.1;
        c.batch_size = 8;
        c.epochs = 120;
    } else if (name == "table1-base") {
        c.lr_encoder = 5e-5;
        c.lr_other = 1e-4;
        c.warmup_ratio = 0.0;
        c.batch_size = 16;
        c.epochs = 120;
    } else if (name == "table3") {
        c.lr_encoder = 5e-5;
        c.lr_other = 1e-4;
        c.warmup_ratio = 0.2;
        c.batch_size = 16;
        c.epochs = 20;
    } else if (name == "trial0") {
        c.lr_encoder = c.lr_other = 9.54706e-5;
        c.weight_decay = 4.08672e-4;
        c.batch_size = 64;
        c.warmup_ratio = 1.63430e-1;
        c.max_grad_norm = 1.47640;
    } else if (name == "trial1") {
        c.lr_encoder = c.lr_other = 1.62565e-4;
        c.weight_decay = 4.51598e-5;
        c.batch_size = 32;
        c.warmup_ratio = 1.58632e-1;
        c.max_grad_norm = 0.80677;
    } else if (name == "trial2") {
        c.lr_encoder = c.lr_other = 8.64886e-5;
        c.weight_decay = 2.07628e-5;
        c.batch_size = 64;
        c.warmup_ratio = 4.34641e-2;
        c.max_grad_norm = 1.44531;
    } else if (name == "toy") {
        c.lr_encoder = 1e-3;
        c.lr_other = 1e-3;
        c.weight_decay = 0.0;
        c.warmup_ratio = 0.02;
        c.batch_size = 4;
        c.epochs = 300;
        c.patience = 300;
        c.max_grad_norm = 5.0;
    } else {
        throw std::invalid_argument("unknown training preset: " + name);
    }
    return c;
}

std::vector<std::string> train_preset_names() {
    return {"paper-main", "table1-base", "table3", "trial0", "trial1", "trial2", "toy"};
}

double lr_multiplier(std::size_t step, std::size_t total_steps, double warmup_ratio) {
    if (total_steps == 0) return 0.0;
    std::size_t warmup =
        static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
    if (step < warmup)
        return static_cast<double>(step) / static_cast<double>(warmup);
    if (total_steps == warmup) return step == warmup ? 1.0 : 0.0;
    double rest = static_cast<double>(total_steps - step) /
                  static_cast<double>(total_steps - warmup);
    return std::max(0.0, rest);
}

void clip_gradients(std::vector<ad::Mat>& grads, const ParamStore& store,
                    double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("max_norm must be positive");
    double sq = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].allFinite())
            throw ad::NumericsError("non-finite gradient for " +
                                    store.entry(static_cast<int>(i)).name);
        sq += grads[i].squaredNorm();
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        double s = max_norm / norm;
        for (ad::Mat& g : grads) g *= s;
    }
}

void optimizer_step(ParamStore& store, const std::vector<ad::Mat>& grads,
                    const TrainConfig& cfg, double lr_factor, std::size_t step_count) {
    double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step_count));
    double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& e = store.entry(static_cast<int>(i));
        double lr = (e.name.rfind("encoder.", 0) == 0 ? cfg.lr_encoder : cfg.lr_other) *
                    lr_factor;
        e.m = cfg.adam_beta1 * e.m + (1.0 - cfg.adam_beta1) * grads[i];
        e.v = cfg.adam_beta2 * e.v + (1.0 - cfg.adam_beta2) * grads[i].cwiseProduct(grads[i]);
        ad::Mat mhat = e.m / bc1;
        ad::Mat vhat = e.v / bc2;
        e.value.array() -=
            lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps) +
                  cfg.weight_decay * e.value.array());
    }
}

EncodedSentence encode_sentence(const Vocab& vocab, const Sentence& s, int max_len) {
    EncodedSentence out;
    out.id = s.id;
    EncodeResult enc = encode_tokens(vocab, s, max_len);
    out.ids = std::move(enc.ids);
    out.gold = std::move(enc.gold);
    Sentence truncated = s;
    if (out.ids.size() < s.tokens.size()) {
        truncated.tokens.resize(out.ids.size());
        if (truncated.dep_heads) {
            truncated.dep_heads->resize(out.ids.size());
            for (int& h : *truncated.dep_heads)
                if (h >= static_cast<int>(out.ids.size())) h = -1;
        }
    }
    out.dep_adj = build_dep_adjacency(truncated);
    return out;
}

namespace {

std::vector<EncodedSentence> encode_all(const Vocab& vocab, const ModelConfig& mcfg,
                                        const std::vector<Sentence>& sents) {
    std::vector<EncodedSentence> out;
    out.reserve(sents.size());
    for (const Sentence& s : sents)
        out.push_back(encode_sentence(vocab, s, mcfg.encoder.max_len));
    return out;
}

}  // namespace

TripletSets predict_split(ParamStore& store, const ModelConfig& mcfg,
                          const std::vector<EncodedSentence>& sentences) {
    TripletSets out;
    for (const EncodedSentence& s : sentences) {
        ad::Tape t;
        Binding bind(t, store);
        out[s.id] = predict_sentence(bind, mcfg, s.ids, s.dep_adj).triplets;
    }
    return out;
}

Metrics evaluate_split(ParamStore& store, const ModelConfig& mcfg,
                       const std::vector<EncodedSentence>& sentences) {
    TripletSets pred = predict_split(store, mcfg, sentences);
    TripletSets gold;
    for (const EncodedSentence& s : sentences) gold[s.id] = s.gold;
    return exact_match(pred, gold);
}

TrainResult train(ParamStore& store, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const DatasetSplit& split, const Vocab& vocab,
                  const DevHook& dev_hook) {
    tcfg.validate();
    if (split.train.empty()) throw ProtocolError("training split is empty");
    {
        std::set<std::string> train_ids;
        for (const Sentence& s : split.train) train_ids.insert(s.id);
        for (const Sentence& s : split.dev)
            if (train_ids.count(s.id)) throw ProtocolError("dev id found in train: " + s.id);
        for (const Sentence& s : split.test)
            if (train_ids.count(s.id)) throw ProtocolError("test id found in train: " + s.id);
    }

    std::vector<EncodedSentence> train_enc = encode_all(vocab, mcfg, split.train);
    std::vector<EncodedSentence> dev_enc = encode_all(vocab, mcfg, split.dev);
    std::vector<EncodedSentence> test_enc = encode_all(vocab, mcfg, split.test);

    std::mt19937_64 rng(tcfg.seed);
    std::size_t batches_per_epoch =
        (train_enc.size() + tcfg.batch_size - 1) / tcfg.batch_size;
    std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(tcfg.epochs);

    // span lists per distinct length are shared across sentences
    auto spans_for = [&](int len) { return enumerate_spans(len, mcfg.head.max_span); };

    TrainResult result;
    result.best.values = store.snapshot_values();
    result.best.epoch = 0;
    double best_f1 = -1.0;
    int stale = 0;
    std::size_t step = 0;

    std::vector<std::size_t> order(train_enc.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        // deterministic shuffle
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            std::swap(order[i], order[i + rng() % (order.size() - i)]);

        double epoch_loss = 0.0;
        std::size_t loss_count = 0;
        double lr_factor_last = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            std::size_t lo = b * tcfg.batch_size;
            std::size_t hi = std::min(lo + tcfg.batch_size, train_enc.size());
            std::vector<ad::Mat> grads = store.zero_grads();
            double batch_loss = 0.0;
            std::size_t used = 0;
            for (std::size_t k = lo; k < hi; ++k) {
                const EncodedSentence& s = train_enc[order[k]];
                std::vector<Span> spans = spans_for(static_cast<int>(s.ids.size()));
                NegativeSamples samples =
                    sample_negatives(s.gold, spans, mcfg.head, rng);
                if (samples.entities.empty()) continue;
                ad::Tape t;
                Binding bind(t, store);
                ModelForward fwd =
                    model_forward(bind, mcfg, s.ids, s.dep_adj, true, rng);
                ad::Var loss = sentence_loss(bind, mcfg, fwd, spans, samples);
                t.backward(loss);
                ++result.backward_passes;
                batch_loss += t.val(loss)(0, 0);
                bind.accumulate_grads(grads);
                ++used;
            }
            if (used == 0) continue;
            for (ad::Mat& g : grads) g /= static_cast<double>(used);
            clip_gradients(grads, store, tcfg.max_grad_norm);
            ++step;
            double lr_factor = lr_multiplier(step, total_steps, tcfg.warmup_ratio);
            lr_factor_last = lr_factor;
            optimizer_step(store, grads, tcfg, lr_factor, step);
            epoch_loss += batch_loss / used;
            ++loss_count;
        }

        // held-out evaluation: forward passes only
        Metrics dev;
        if (dev_hook) {
            dev.f1 = dev_hook(epoch);
        } else if (!dev_enc.empty()) {
            dev = evaluate_split(store, mcfg, dev_enc);
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_count ? epoch_loss / loss_count : 0.0;
        log.dev_p = dev.precision;
        log.dev_r = dev.recall;
        log.dev_f1 = dev.f1;
        log.lr_factor = lr_factor_last;
        result.log.push_back(log);
        result.epochs_run = epoch;

        if (dev.f1 > best_f1) {
            best_f1 = dev.f1;
            result.best.values = store.snapshot_values();
            result.best.epoch = epoch;
            result.best.dev_metrics = dev;
            stale = 0;
        } else {
            ++stale;
        }

        if (tcfg.stop_on_train_f1) {
            Metrics train_m = evaluate_split(store, mcfg, train_enc);
            if (train_m.f1 >= 1.0) {
                result.best.values = store.snapshot_values();
                result.best.epoch = epoch;
                break;
            }
        }
        if (stale >= tcfg.patience) break;
    }

    // final test evaluation, exactly once, on the best checkpoint
    std::vector<ad::Mat> current = store.snapshot_values();
    store.restore_values(result.best.values);
    if (!test_enc.empty()) result.test_metrics = evaluate_split(store, mcfg, test_enc);
    store.restore_values(current);
    return result;
}

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,train_loss,dev_P,dev_R,dev_F1,lr\n";
    for (const EpochLog& l : log)
        out << l.epoch << ',' << l.train_loss << ',' << l.dev_p << ',' << l.dev_r << ','
            << l.dev_f1 << ',' << l.lr_factor << '\n';
}

}  // namespace dess
