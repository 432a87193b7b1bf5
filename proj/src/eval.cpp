#include "dess/eval.hpp"

#include <algorithm>
#include <vector>

namespace dess {

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

namespace {

void check_same_ids(const TripletSets& pred, const TripletSets& gold) {
    if (pred.size() != gold.size())
        throw ValidationError("prediction/gold sentence id sets differ");
    auto p = pred.begin();
    auto g = gold.begin();
    for (; p != pred.end(); ++p, ++g)
        if (p->first != g->first)
            throw ValidationError("prediction/gold sentence id mismatch: " + p->first +
                                  " vs " + g->first);
}

}  // namespace

Metrics exact_match(const TripletSets& pred, const TripletSets& gold) {
    check_same_ids(pred, gold);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [id, p] : pred) {
        const auto& g = gold.at(id);
        std::size_t hit = 0;
        for (const Triplet& t : p)
            if (g.count(t)) ++hit;
        tp += hit;
        fp += p.size() - hit;
        fn += g.size() - hit;
    }
    return metrics_from_counts(tp, fp, fn);
}

ErrorReport categorize_errors(const TripletSets& pred, const TripletSets& gold) {
    check_same_ids(pred, gold);
    ErrorReport r;
    for (const auto& [id, p] : pred) {
        const auto& g = gold.at(id);
        std::vector<Triplet> unmatched_pred, unmatched_gold;
        for (const Triplet& t : p)
            if (!g.count(t)) unmatched_pred.push_back(t);
        for (const Triplet& t : g)
            if (!p.count(t)) unmatched_gold.push_back(t);
        std::vector<bool> consumed(unmatched_pred.size(), false);

        for (const Triplet& gt : unmatched_gold) {
            auto take = [&](auto match) -> bool {
                for (std::size_t i = 0; i < unmatched_pred.size(); ++i) {
                    if (!consumed[i] && match(unmatched_pred[i])) {
                        consumed[i] = true;
                        return true;
                    }
                }
                return false;
            };
            if (take([&](const Triplet& pt) {
                    return pt.aspect == gt.aspect && pt.opinion == gt.opinion &&
                           pt.sentiment != gt.sentiment;
                })) {
                ++r.sentiment_error;
            } else if (take([&](const Triplet& pt) {
                           return pt.aspect.overlaps(gt.aspect) &&
                                  pt.opinion.overlaps(gt.opinion);
                       })) {
                ++r.boundary_error;
            } else {
                ++r.missed_triplet;
            }
        }
        for (std::size_t i = 0; i < unmatched_pred.size(); ++i)
            if (!consumed[i]) ++r.spurious_triplet;
    }
    return r;
}

}  // namespace dess
