#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dess/ad.hpp"

namespace dess {

/// Named parameter tensors with Adam moment buffers. Entry order is
/// insertion order and defines checkpoint/gradient layout.
class ParamStore {
public:
    struct Entry {
        std::string name;
        ad::Mat value;
        ad::Mat m;  // Adam first moment
        ad::Mat v;  // Adam second moment
    };

    int add(const std::string& name, ad::Mat value);
    int add_uniform(const std::string& name, int rows, int cols, std::mt19937_64& rng);
    int add_zeros(const std::string& name, int rows, int cols);
    int add_ones(const std::string& name, int rows, int cols);

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    int index_of(const std::string& name) const;
    Entry& entry(int i) { return entries_[i]; }
    const Entry& entry(int i) const { return entries_[i]; }
    ad::Mat& value(const std::string& name) { return entries_[index_of(name)].value; }
    const ad::Mat& value(const std::string& name) const {
        return entries_[index_of(name)].value;
    }
    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;

    std::vector<ad::Mat> zero_grads() const;
    std::vector<ad::Mat> snapshot_values() const;
    void restore_values(const std::vector<ad::Mat>& values);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

/// Binds store tensors to leaves of one tape; each tensor becomes a
/// single leaf no matter how often it is referenced in the forward pass.
class Binding {
public:
    Binding(ad::Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

    ad::Var operator()(const std::string& name);

    /// grads[i] += d(loss)/d(entry i) * weight for every bound tensor.
    void accumulate_grads(std::vector<ad::Mat>& grads, double weight = 1.0) const;

    ad::Tape& tape() { return tape_; }
    ParamStore& store() { return store_; }

private:
    ad::Tape& tape_;
    ParamStore& store_;
    std::unordered_map<int, ad::Var> bound_;
};

}  // namespace dess
