#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "srfbn/error.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

/// Named learnable parameters in insertion order.
///
/// Identifiers are dotted layer paths such as "fb.group2.up.weight".
template <class Scalar>
class BasicWeightSet {
 public:
  using Entry = std::pair<std::string, Tensor<Scalar>>;

  void add(std::string id, Tensor<Scalar> value) {
    detail::require<ConfigError>(!index_.contains(id), "duplicate parameter identifier " + id);
    index_.emplace(id, entries_.size());
    entries_.emplace_back(std::move(id), std::move(value));
  }

  bool contains(const std::string& id) const { return index_.contains(id); }

  const Tensor<Scalar>& at(const std::string& id) const { return entries_[slot(id)].second; }
  Tensor<Scalar>& at(const std::string& id) { return entries_[slot(id)].second; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& [id, t] : entries_) total += t.size();
    return total;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Same identifiers and dims, all values zero.
  BasicWeightSet zeros_like() const {
    BasicWeightSet out;
    for (const auto& [id, t] : entries_) out.add(id, Tensor<Scalar>(t.dims()));
    return out;
  }

  template <class Other>
  BasicWeightSet<Other> cast() const {
    BasicWeightSet<Other> out;
    for (const auto& [id, t] : entries_) out.add(id, t.template cast<Other>());
    return out;
  }

  bool operator==(const BasicWeightSet& other) const { return entries_ == other.entries_; }

 private:
  std::size_t slot(const std::string& id) const {
    auto it = index_.find(id);
    detail::require<ConfigError>(it != index_.end(), "unknown parameter identifier " + id);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

using WeightSet = BasicWeightSet<float>;

}  // namespace srfbn
