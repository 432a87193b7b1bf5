#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "dess/checkpoint.hpp"
#include "dess/corpus.hpp"
#include "dess/eval.hpp"
#include "dess/model.hpp"
#include "dess/synthetic.hpp"
#include "dess/train.hpp"

namespace {

using nlohmann::json;

int log_level() {
    const char* v = std::getenv("DESS_LOG");
    return v ? std::atoi(v) : 0;
}

void info(const std::string& msg) {
    if (log_level() > 0) std::cerr << "[dess] " << msg << "\n";
}

std::vector<dess::Sentence> load_data(const std::string& path, const std::string& name,
                                      const std::string& heads_path) {
    auto sents = dess::load_sentences(path, name);
    if (!heads_path.empty()) dess::attach_dep_heads(sents, heads_path);
    return sents;
}

json metrics_json(const dess::Metrics& m) {
    return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}};
}

dess::TripletSets gold_sets(const std::vector<dess::Sentence>& sents) {
    dess::TripletSets out;
    for (const auto& s : sents) out[s.id] = s.gold;
    return out;
}

json triplet_json(const dess::Triplet& t) {
    return json{{"aspect", {t.aspect.start, t.aspect.end}},
                {"opinion", {t.opinion.start, t.opinion.end}},
                {"sentiment", dess::to_string(t.sentiment)}};
}

dess::Triplet triplet_from_json(const json& j) {
    dess::Triplet t;
    t.aspect = {j.at("aspect")[0], j.at("aspect")[1]};
    t.opinion = {j.at("opinion")[0], j.at("opinion")[1]};
    t.sentiment = dess::sentiment_from_tag(j.at("sentiment"));
    return t;
}

dess::TripletSets read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    dess::TripletSets out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        std::set<dess::Triplet>& ts = out[j.at("id")];
        for (const json& tj : j.at("triplets")) ts.insert(triplet_from_json(tj));
    }
    return out;
}

void write_predictions(std::ostream& os, const std::string& id,
                       const std::set<dess::Triplet>& triplets) {
    json j;
    j["id"] = id;
    j["triplets"] = json::array();
    for (const auto& t : triplets) j["triplets"].push_back(triplet_json(t));
    os << j.dump() << "\n";
}

struct ModelFlags {
    std::string config_path;
    std::string model_preset = "toy";
};

dess::ModelConfig make_model_config(const ModelFlags& mf, int vocab_size) {
    if (!mf.config_path.empty()) {
        std::ifstream in(mf.config_path);
        if (!in) throw std::runtime_error("cannot open " + mf.config_path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        json j = json::parse(text);
        if (j.contains("model")) j = j.at("model");
        dess::ModelConfig cfg = dess::model_config_from_json(j.dump());
        cfg.encoder.vocab_size = vocab_size;
        cfg.finalize();
        return cfg;
    }
    if (mf.model_preset == "toy") return dess::toy_model_config(vocab_size);
    if (mf.model_preset == "v3-base-shape") return dess::base_model_config(vocab_size);
    if (mf.model_preset == "v3-large-shape") return dess::large_model_config(vocab_size);
    if (mf.model_preset == "v2-xxlarge-shape") return dess::xxlarge_model_config(vocab_size);
    throw std::runtime_error("unknown model shape preset: " + mf.model_preset);
}

dess::TrainConfig make_train_config(const std::string& config_path,
                                    const std::string& preset) {
    dess::TrainConfig cfg = dess::train_preset(preset);
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open " + config_path);
        json j = json::parse(std::string((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>()));
        if (j.contains("train")) {
            const json& t = j.at("train");
            if (t.contains("lr_encoder")) cfg.lr_encoder = t["lr_encoder"];
            if (t.contains("lr_other")) cfg.lr_other = t["lr_other"];
            if (t.contains("weight_decay")) cfg.weight_decay = t["weight_decay"];
            if (t.contains("warmup_ratio")) cfg.warmup_ratio = t["warmup_ratio"];
            if (t.contains("max_grad_norm")) cfg.max_grad_norm = t["max_grad_norm"];
            if (t.contains("epochs")) cfg.epochs = t["epochs"];
            if (t.contains("batch_size")) cfg.batch_size = t["batch_size"];
            if (t.contains("seed")) cfg.seed = t["seed"];
            if (t.contains("lambda_kl")) cfg.lambda_kl = t["lambda_kl"];
            if (t.contains("patience")) cfg.patience = t["patience"];
        }
    }
    return cfg;
}

std::vector<dess::EncodedSentence> encode_for_model(const dess::Vocab& vocab,
                                                    const dess::ModelConfig& cfg,
                                                    const std::vector<dess::Sentence>& in) {
    std::vector<dess::EncodedSentence> out;
    out.reserve(in.size());
    for (const auto& s : in) out.push_back(dess::encode_sentence(vocab, s, cfg.encoder.max_len));
    return out;
}

void write_pgm(const std::string& path, const dess::ad::Mat& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    double mx = m.maxCoeff();
    if (mx <= 0.0) mx = 1.0;
    out << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            unsigned char px =
                static_cast<unsigned char>(std::min(255.0, 255.0 * m(r, c) / mx));
            out.put(static_cast<char>(px));
        }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DESS: dual-channel aspect sentiment triplet extraction"};
    app.require_subcommand(1);

    std::string data_path, dev_path, test_path, heads_path, checkpoint_path;
    std::string out_path, log_path, pred_path, config_path;
    std::string train_preset_name = "toy";
    ModelFlags model_flags;
    std::uint64_t seed = 42;
    int layer = -1;
    std::string head_sel = "mean";
    bool pgm = false;
    bool synth = false;

    auto* stats = app.add_subcommand("stats", "dataset statistics as JSON");
    stats->add_option("--data", data_path, "ASTE data file")->required();

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--data", data_path, "training data")->required();
    train->add_option("--dev", dev_path, "development data");
    train->add_option("--test", test_path, "test data");
    train->add_option("--heads", heads_path, "dependency heads sidecar for --data");
    train->add_option("--config", config_path, "JSON config file");
    train->add_option("--preset", train_preset_name, "training preset")
        ->check(CLI::IsMember(dess::train_preset_names()));
    train->add_option("--model-preset", model_flags.model_preset,
                      "model shape: toy|v3-base-shape|v3-large-shape|v2-xxlarge-shape");
    train->add_option("--seed", seed, "random seed");
    train->add_option("--checkpoint", checkpoint_path, "output checkpoint path")
        ->required();
    train->add_option("--log", log_path, "training log CSV path");

    auto* eval = app.add_subcommand("eval", "evaluate predictions or a checkpoint");
    eval->add_option("--data", data_path, "gold data file")->required();
    eval->add_option("--heads", heads_path, "dependency heads sidecar");
    eval->add_option("--checkpoint", checkpoint_path, "model checkpoint");
    eval->add_option("--pred", pred_path, "predictions JSONL (instead of a checkpoint)");

    auto* predict = app.add_subcommand("predict", "predict triplets as JSONL");
    predict->add_option("--data", data_path, "input data file")->required();
    predict->add_option("--heads", heads_path, "dependency heads sidecar");
    predict->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    predict->add_option("--out", out_path, "output path (default stdout)");

    auto* attn = app.add_subcommand("attn-export", "export attention matrices as CSV");
    attn->add_option("--data", data_path, "input data file")->required();
    attn->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    attn->add_option("--layer", layer, "layer index, -1 = last");
    attn->add_option("--head", head_sel, "head index or 'mean'");
    attn->add_option("--out", out_path, "output directory")->required();
    attn->add_flag("--pgm", pgm, "also write grayscale PGM heatmaps");

    std::size_t synth_n = 16;
    std::uint64_t synth_seed = 7;
    auto* gen = app.add_subcommand("gen-synth", "write a synthetic fixture corpus");
    gen->add_option("--out", out_path, "output path")->required();
    gen->add_option("--n", synth_n, "number of sentences");
    gen->add_option("--seed", synth_seed, "generator seed");
    (void)synth;

    gen->callback([&] {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        for (const auto& s : dess::synthetic_corpus(synth_n, synth_seed))
            os << dess::serialize_sentence(s) << "\n";
    });

    CLI11_PARSE(app, argc, argv);

    try {
        if (stats->parsed()) {
            auto sents = load_data(data_path, "data", "");
            dess::DatasetStats st = dess::dataset_stats(sents);
            json j{{"sentences", st.num_sentences}, {"triplets", st.num_triplets},
                   {"pos", st.pos},                 {"neu", st.neu},
                   {"neg", st.neg}};
            std::cout << j.dump() << "\n";
        } else if (train->parsed()) {
            dess::DatasetSplit split;
            split.train = load_data(data_path, "train", heads_path);
            if (!dev_path.empty()) split.dev = load_data(dev_path, "dev", "");
            if (!test_path.empty()) split.test = load_data(test_path, "test", "");
            dess::Vocab vocab = dess::build_vocab(split.train, 1);
            dess::ModelConfig mcfg = make_model_config(model_flags, vocab.size());
            dess::TrainConfig tcfg = make_train_config(config_path, train_preset_name);
            tcfg.seed = seed;
            mcfg.lambda_kl = tcfg.lambda_kl;
            dess::ParamStore store;
            dess::register_model_params(store, mcfg, tcfg.seed);
            info("training on " + std::to_string(split.train.size()) + " sentences");
            dess::TrainResult res = dess::train(store, mcfg, tcfg, split, vocab);
            store.restore_values(res.best.values);
            dess::save_checkpoint(checkpoint_path, store, mcfg, vocab);
            if (!log_path.empty()) dess::write_training_log_csv(log_path, res.log);
            json j{{"epochs_run", res.epochs_run},
                   {"best_epoch", res.best.epoch},
                   {"dev", metrics_json(res.best.dev_metrics)},
                   {"test", metrics_json(res.test_metrics)}};
            std::cout << j.dump() << "\n";
        } else if (eval->parsed()) {
            auto sents = load_data(data_path, "data", heads_path);
            dess::TripletSets gold = gold_sets(sents);
            dess::TripletSets pred;
            if (!pred_path.empty()) {
                pred = read_predictions(pred_path);
                for (const auto& [id, g] : gold)
                    if (!pred.count(id)) pred[id] = {};
            } else if (!checkpoint_path.empty()) {
                dess::LoadedCheckpoint ck = dess::load_checkpoint(checkpoint_path);
                auto enc = encode_for_model(ck.vocab, ck.cfg, sents);
                pred = dess::predict_split(ck.store, ck.cfg, enc);
                dess::TripletSets truncated_gold;
                for (const auto& e : enc) truncated_gold[e.id] = e.gold;
                gold = truncated_gold;
            } else {
                std::cerr << "eval requires --checkpoint or --pred\n";
                return 2;
            }
            dess::Metrics m = dess::exact_match(pred, gold);
            dess::ErrorReport er = dess::categorize_errors(pred, gold);
            json j{{"metrics", metrics_json(m)},
                   {"errors",
                    {{"missed_triplet", er.missed_triplet},
                     {"spurious_triplet", er.spurious_triplet},
                     {"boundary_error", er.boundary_error},
                     {"sentiment_error", er.sentiment_error}}}};
            std::cout << j.dump() << "\n";
        } else if (predict->parsed()) {
            dess::LoadedCheckpoint ck = dess::load_checkpoint(checkpoint_path);
            auto sents = load_data(data_path, "data", heads_path);
            auto enc = encode_for_model(ck.vocab, ck.cfg, sents);
            std::ofstream file;
            std::ostream* os = &std::cout;
            if (!out_path.empty()) {
                file.open(out_path);
                if (!file) throw std::runtime_error("cannot write " + out_path);
                os = &file;
            }
            dess::TripletSets pred = dess::predict_split(ck.store, ck.cfg, enc);
            for (const auto& e : enc) write_predictions(*os, e.id, pred.at(e.id));
        } else if (attn->parsed()) {
            dess::LoadedCheckpoint ck = dess::load_checkpoint(checkpoint_path);
            auto sents = load_data(data_path, "data", "");
            std::filesystem::create_directories(out_path);
            int head = head_sel == "mean" ? -1 : std::stoi(head_sel);
            for (const auto& s : sents) {
                dess::EncodeResult er = dess::encode_tokens(ck.vocab, s, ck.cfg.encoder.max_len);
                dess::ad::Mat m =
                    dess::attention_matrix(ck.store, ck.cfg, er.ids, layer, head);
                std::string base = out_path + "/" + s.id;
                std::ofstream csv(base + ".csv");
                for (Eigen::Index r = 0; r < m.rows(); ++r) {
                    for (Eigen::Index c = 0; c < m.cols(); ++c) {
                        if (c) csv << ',';
                        csv << m(r, c);
                    }
                    csv << '\n';
                }
                if (pgm) write_pgm(base + ".pgm", m);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
