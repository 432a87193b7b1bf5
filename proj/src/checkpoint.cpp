#include "dess/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <json.hpp>

namespace dess {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "DESSCKPT1\n";

json config_json(const ModelConfig& cfg) {
    return json{
        {"encoder",
         {{"vocab_size", cfg.encoder.vocab_size},
          {"hidden_dim", cfg.encoder.hidden_dim},
          {"num_heads", cfg.encoder.num_heads},
          {"num_layers", cfg.encoder.num_layers},
          {"max_rel_distance", cfg.encoder.max_rel_distance},
          {"ffn_dim", cfg.encoder.ffn_dim},
          {"dropout_rate", cfg.encoder.dropout_rate},
          {"max_len", cfg.encoder.max_len}}},
        {"lstm",
         {{"num_layers", cfg.lstm.num_layers},
          {"hidden_per_direction", cfg.lstm.hidden_per_direction},
          {"dropout_rate", cfg.lstm.dropout_rate}}},
        {"gcn",
         {{"hidden_dim", cfg.gcn.hidden_dim},
          {"num_layers", cfg.gcn.num_layers},
          {"dropout_rate", cfg.gcn.dropout_rate}}},
        {"head",
         {{"max_span", cfg.head.max_span},
          {"neg_entity", cfg.head.neg_entity},
          {"neg_triple", cfg.head.neg_triple},
          {"max_pairs", cfg.head.max_pairs},
          {"size_emb_dim", cfg.head.size_emb_dim},
          {"hidden_dim", cfg.head.hidden_dim}}},
        {"lambda_kl", cfg.lambda_kl},
    };
}

ModelConfig config_from(const json& j) {
    ModelConfig cfg;
    const json& e = j.at("encoder");
    cfg.encoder.vocab_size = e.at("vocab_size");
    cfg.encoder.hidden_dim = e.at("hidden_dim");
    cfg.encoder.num_heads = e.at("num_heads");
    cfg.encoder.num_layers = e.at("num_layers");
    cfg.encoder.max_rel_distance = e.at("max_rel_distance");
    cfg.encoder.ffn_dim = e.at("ffn_dim");
    cfg.encoder.dropout_rate = e.at("dropout_rate");
    cfg.encoder.max_len = e.at("max_len");
    const json& l = j.at("lstm");
    cfg.lstm.num_layers = l.at("num_layers");
    cfg.lstm.hidden_per_direction = l.at("hidden_per_direction");
    cfg.lstm.dropout_rate = l.at("dropout_rate");
    const json& g = j.at("gcn");
    cfg.gcn.hidden_dim = g.at("hidden_dim");
    cfg.gcn.num_layers = g.at("num_layers");
    cfg.gcn.dropout_rate = g.at("dropout_rate");
    const json& h = j.at("head");
    cfg.head.max_span = h.at("max_span");
    cfg.head.neg_entity = h.at("neg_entity");
    cfg.head.neg_triple = h.at("neg_triple");
    cfg.head.max_pairs = h.at("max_pairs");
    cfg.head.size_emb_dim = h.at("size_emb_dim");
    cfg.head.hidden_dim = h.at("hidden_dim");
    cfg.lambda_kl = j.at("lambda_kl");
    cfg.finalize();
    return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    return config_json(cfg).dump(2);
}

ModelConfig model_config_from_json(const std::string& json_text) {
    return config_from(json::parse(json_text));
}

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const ModelConfig& cfg, const Vocab& vocab) {
    json header;
    header["config"] = config_json(cfg);
    header["vocab"] = vocab.id_to_token;
    header["min_freq"] = vocab.min_freq;
    json tensors = json::array();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& e = store.entry(static_cast<int>(i));
        tensors.push_back({{"name", e.name},
                           {"rows", e.value.rows()},
                           {"cols", e.value.cols()}});
    }
    header["tensors"] = tensors;
    std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, sizeof(kMagic) - 1);
    std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (std::size_t i = 0; i < store.size(); ++i) {
        const ad::Mat& m = store.entry(static_cast<int>(i)).value;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(magic)))
        throw std::runtime_error(path + ": not a DESS checkpoint");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error(path + ": truncated header");
    json header = json::parse(htext);

    LoadedCheckpoint ck;
    ck.cfg = config_from(header.at("config"));
    ck.vocab.id_to_token = header.at("vocab").get<std::vector<std::string>>();
    ck.vocab.min_freq = header.value("min_freq", 1);
    for (int i = 2; i < ck.vocab.size(); ++i)
        ck.vocab.token_to_id[ck.vocab.id_to_token[i]] = i;

    for (const json& tj : header.at("tensors")) {
        Eigen::Index rows = tj.at("rows");
        Eigen::Index cols = tj.at("cols");
        ad::Mat m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                double v;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                m(r, c) = v;
            }
        if (!in) throw std::runtime_error(path + ": truncated tensor data");
        ck.store.add(tj.at("name"), std::move(m));
    }
    return ck;
}

}  // namespace dess
