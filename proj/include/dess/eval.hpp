#pragma once

#include <map>
#include <set>
#include <string>

#include "dess/corpus.hpp"

namespace dess {

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct ErrorReport {
    std::size_t missed_triplet = 0;
    std::size_t spurious_triplet = 0;
    std::size_t boundary_error = 0;
    std::size_t sentiment_error = 0;
};

using TripletSets = std::map<std::string, std::set<Triplet>>;

/// Micro-averaged exact-match scoring: a prediction counts as tp iff a
/// gold triplet in the same sentence matches both spans and the sentiment.
Metrics exact_match(const TripletSets& pred, const TripletSets& gold);

/// Per unmatched gold, most specific diagnosis wins:
/// sentiment_error (spans exact, sentiment differs) over boundary_error
/// (a prediction overlaps both spans) over missed_triplet. Unconsumed
/// unmatched predictions are spurious.
ErrorReport categorize_errors(const TripletSets& pred, const TripletSets& gold);

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

}  // namespace dess
