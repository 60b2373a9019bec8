#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "seqtag/array.hpp"

// Ranking metrics over N x V score and multi-hot label matrices. A label
// entry counts as positive when it exceeds 0.5.

namespace seqtag::metrics {

/// Mean of precision at the rank of each positive, ranking by descending
/// score with ties broken by original index. Empty when there are no positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> labels);

struct ClassAps {
  std::vector<std::optional<double>> ap;  // per class, empty when the class has no positive
  std::vector<std::size_t> positives;
  /// Mean over classes with at least one positive; 0 when there are none.
  double mean = 0.0;
  std::size_t evaluated = 0;
};

namespace serial {
ClassAps mean_ap(const Array& scores, const Array& labels);
}
namespace omp {
ClassAps mean_ap(const Array& scores, const Array& labels);
}
/// Dispatches on kernels::execution().
ClassAps mean_ap(const Array& scores, const Array& labels);

struct LabelScore {
  std::size_t label = 0;
  double score = 0.0;
};

/// The min(k, V) highest scores of one row, descending, ties by label index.
std::vector<LabelScore> top_k(std::span<const double> row, std::size_t k);

/// Pools each video's top-k predictions into one list and computes its AP,
/// with sum over videos of min(k, positives) as the denominator.
double gap_at_k(const Array& scores, const Array& labels, std::size_t k = 20);

struct EvalReport {
  ClassAps classes;
  double gap = 0.0;
  std::size_t k = 20;
};

EvalReport evaluate(const Array& scores, const Array& labels, std::size_t k = 20);

}  // namespace seqtag::metrics
