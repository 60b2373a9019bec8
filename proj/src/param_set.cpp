#include "seqtag/param_set.hpp"

#include "seqtag/error.hpp"

namespace seqtag {

Array& ParamSet::add(const std::string& name, Array value, bool trainable) {
  require(!contains(name), "duplicate parameter '" + name + "'");
  auto [it, inserted] = entries_.emplace(name, Parameter{std::move(value), trainable});
  return it->second.value;
}

const Array& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), "unknown parameter '" + name + "'");
  return it->second.value;
}

Array& ParamSet::at(const std::string& name) {
  auto it = entries_.find(name);
  require(it != entries_.end(), "unknown parameter '" + name + "'");
  return it->second.value;
}

bool ParamSet::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), "unknown parameter '" + name + "'");
  return it->second.trainable;
}

void ParamSet::set_trainable(const std::string& name, bool trainable) {
  auto it = entries_.find(name);
  require(it != entries_.end(), "unknown parameter '" + name + "'");
  it->second.trainable = trainable;
}

std::size_t ParamSet::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_)
    if (!trainable_only || p.trainable) n += p.value.size();
  return n;
}

std::vector<double> ParamSet::flatten(bool trainable_only) const {
  std::vector<double> flat;
  flat.reserve(scalar_count(trainable_only));
  for (const auto& [name, p] : entries_)
    if (!trainable_only || p.trainable)
      flat.insert(flat.end(), p.value.values().begin(), p.value.values().end());
  return flat;
}

void ParamSet::assign_flat(std::span<const double> flat, bool trainable_only) {
  require(flat.size() == scalar_count(trainable_only), "flat parameter length mismatch");
  std::size_t offset = 0;
  for (auto& [name, p] : entries_) {
    if (trainable_only && !p.trainable) continue;
    for (auto& v : p.value.values()) v = flat[offset++];
  }
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.trainable != ib->second.trainable ||
        !(ia->second.value == ib->second.value))
      return false;
  }
  return true;
}

}  // namespace seqtag
