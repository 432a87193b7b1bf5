#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dess/corpus.hpp"

namespace dess {

/// Seeded template generator for desk-scale fixtures: review-style
/// sentences with 1-2 gold triplets each, drawn from a ~30 word pool.
std::vector<Sentence> synthetic_corpus(std::size_t n, std::uint64_t seed,
                                       const std::string& id_prefix = "synth");

}  // namespace dess
