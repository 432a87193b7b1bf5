#pragma once

#include <string>

#include "dess/corpus.hpp"
#include "dess/model.hpp"
#include "dess/params.hpp"

namespace dess {

/// Single-file archive: magic, little-endian header length, JSON header
/// (model config, vocab, tensor manifest), then row-major little-endian
/// 64-bit floats per tensor in manifest order.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const ModelConfig& cfg, const Vocab& vocab);

struct LoadedCheckpoint {
    ParamStore store;
    ModelConfig cfg;
    Vocab vocab;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace dess
