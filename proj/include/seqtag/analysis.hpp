#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/dataio.hpp"

// Dataset label statistics: per-class frequency with its cumulative coverage
// curve, and the co-occurrence counts of the most frequent labels.

namespace seqtag::data {

struct LabelDistribution {
  std::vector<std::size_t> counts;  // positives per class
  /// coverage[c] = share of (video, label) pairs whose label is < c; V + 1 entries.
  std::vector<double> coverage;
  std::size_t pairs = 0;
};

LabelDistribution label_distribution(const Dataset& dataset);

struct Cooccurrence {
  std::vector<std::size_t> classes;  // the `top` most frequent, ties by index
  Array counts;                      // top x top; (a, b) = videos labeled with both
};

Cooccurrence cooccurrence_matrix(const Dataset& dataset, std::size_t top = 50);

/// `class_id,count,coverage` rows plus a final `V` coverage row.
void write_distribution_csv(const std::filesystem::path& path, const LabelDistribution& dist);
/// Header of class ids, then one row per class.
void write_cooccurrence_csv(const std::filesystem::path& path, const Cooccurrence& co);

}  // namespace seqtag::data
