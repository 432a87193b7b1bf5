#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dess/corpus.hpp"
#include "dess/eval.hpp"
#include "dess/model.hpp"
#include "dess/params.hpp"

namespace dess {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double lr_encoder = 2e-5;
    double lr_other = 1e-4;
    double weight_decay = 0.01;
    double warmup_ratio = 0.1;
    double max_grad_norm = 1.0;
    int epochs = 120;
    int batch_size = 8;
    std::uint64_t seed = 42;
    double lambda_kl = 0.1;
    int patience = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool stop_on_train_f1 = false;  // stop once train exact-match F1 hits 1.0

    void validate() const;
};

/// Named presets mirroring the reported configurations:
/// paper-main, table1-base, table3, trial0..trial2, toy.
TrainConfig train_preset(const std::string& name);
std::vector<std::string> train_preset_names();

/// Linear 0->1 over ceil(warmup_ratio*total) steps, then linear 1->0.
double lr_multiplier(std::size_t step, std::size_t total_steps, double warmup_ratio);

/// Global L2-norm clipping; throws on non-finite gradients.
void clip_gradients(std::vector<ad::Mat>& grads, const ParamStore& store,
                    double max_norm);

/// One AdamW update (decoupled weight decay). Parameters whose name
/// starts with "encoder." use lr_encoder, the rest lr_other.
void optimizer_step(ParamStore& store, const std::vector<ad::Mat>& grads,
                    const TrainConfig& cfg, double lr_factor, std::size_t step_count);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_p = 0.0;
    double dev_r = 0.0;
    double dev_f1 = 0.0;
    double lr_factor = 0.0;
};

struct Checkpoint {
    std::vector<ad::Mat> values;
    int epoch = 0;
    Metrics dev_metrics;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochLog> log;
    Metrics test_metrics;
    std::size_t backward_passes = 0;
    std::size_t heldout_update_events = 0;  // must stay zero
    int epochs_run = 0;
};

struct EncodedSentence {
    std::string id;
    std::vector<int> ids;
    std::set<Triplet> gold;
    ad::Mat dep_adj;
};

EncodedSentence encode_sentence(const Vocab& vocab, const Sentence& s, int max_len);

/// Dev evaluation hook for protocol tests: given the epoch, returns a
/// scripted dev F1 instead of running the evaluator.
using DevHook = std::function<double(int epoch)>;

TrainResult train(ParamStore& store, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const DatasetSplit& split, const Vocab& vocab,
                  const DevHook& dev_hook = nullptr);

Metrics evaluate_split(ParamStore& store, const ModelConfig& mcfg,
                       const std::vector<EncodedSentence>& sentences);

TripletSets predict_split(ParamStore& store, const ModelConfig& mcfg,
                          const std::vector<EncodedSentence>& sentences);

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace dess
