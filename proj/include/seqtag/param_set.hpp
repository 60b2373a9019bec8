#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "seqtag/array.hpp"

namespace seqtag {

struct Parameter {
  Array value;
  bool trainable = true;
};

/// Named model parameters, ordered by name so that flattening, checkpoints
/// and optimizer updates visit them in a stable order.
class ParamSet {
 public:
  Array& add(const std::string& name, Array value, bool trainable = true);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Array& at(const std::string& name) const;
  Array& at(const std::string& name);
  bool trainable(const std::string& name) const;
  void set_trainable(const std::string& name, bool trainable);

  std::size_t count() const { return entries_.size(); }
  std::size_t scalar_count(bool trainable_only) const;

  /// Concatenation of all (trainable) parameter values in name order.
  std::vector<double> flatten(bool trainable_only) const;
  void assign_flat(std::span<const double> flat, bool trainable_only);

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::map<std::string, Parameter> entries_;
};

}  // namespace seqtag
