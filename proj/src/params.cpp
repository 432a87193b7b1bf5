#include "dess/params.hpp"

#include <cmath>
#include <stdexcept>

namespace dess {

int ParamStore::add(const std::string& name, ad::Mat value) {
    if (index_.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.m = ad::Mat::Zero(value.rows(), value.cols());
    e.v = ad::Mat::Zero(value.rows(), value.cols());
    e.value = std::move(value);
    entries_.push_back(std::move(e));
    int idx = static_cast<int>(entries_.size()) - 1;
    index_[name] = idx;
    return idx;
}

int ParamStore::add_uniform(const std::string& name, int rows, int cols,
                            std::mt19937_64& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    ad::Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
    return add(name, std::move(m));
}

int ParamStore::add_zeros(const std::string& name, int rows, int cols) {
    return add(name, ad::Mat::Zero(rows, cols));
}

int ParamStore::add_ones(const std::string& name, int rows, int cols) {
    return add(name, ad::Mat::Ones(rows, cols));
}

int ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
}

std::vector<ad::Mat> ParamStore::zero_grads() const {
    std::vector<ad::Mat> g;
    g.reserve(entries_.size());
    for (const Entry& e : entries_)
        g.push_back(ad::Mat::Zero(e.value.rows(), e.value.cols()));
    return g;
}

std::vector<ad::Mat> ParamStore::snapshot_values() const {
    std::vector<ad::Mat> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.value);
    return out;
}

void ParamStore::restore_values(const std::vector<ad::Mat>& values) {
    if (values.size() != entries_.size())
        throw std::runtime_error("restore_values: entry count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) entries_[i].value = values[i];
}

ad::Var Binding::operator()(const std::string& name) {
    int idx = store_.index_of(name);
    auto it = bound_.find(idx);
    if (it != bound_.end()) return it->second;
    ad::Var v = tape_.leaf(store_.entry(idx).value, true);
    bound_.emplace(idx, v);
    return v;
}

void Binding::accumulate_grads(std::vector<ad::Mat>& grads, double weight) const {
    for (const auto& [idx, var] : bound_)
        grads[idx] += weight * tape_.grad(var);
}

}  // namespace dess
