#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/metrics.hpp"

// Prediction sets and the text files that carry predictions and evaluation
// results between subcommands.

namespace seqtag {

/// Per-video class scores in [0, 1]. `scores` is N x V, or empty when N = 0.
struct PredictionSet {
  std::vector<std::string> ids;
  std::size_t vocabulary = 0;
  Array scores;

  std::size_t size() const { return ids.size(); }
  void validate() const;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);
/// Parses the whole of `text` as a double. Throws DataError otherwise.
double parse_double(std::string_view text);

/// Header `VideoId,LabelConfidencePairs`, then `id,label score label score ...`
/// with the top min(k, V) pairs in descending score order. When `listed` (N x V)
/// is given, only labels it marks with 1 are eligible.
void write_prediction_csv(std::ostream& out, const PredictionSet& set, std::size_t k = 20,
                          const Array* listed = nullptr);
void write_prediction_csv(const std::filesystem::path& path, const PredictionSet& set,
                          std::size_t k = 20, const Array* listed = nullptr);

struct ParsedPredictions {
  PredictionSet set;     // unlisted labels score 0
  Array listed;          // N x V, 1 where the file listed the label
};

/// Throws DataError on malformed lines (with line number) or labels >= vocabulary.
ParsedPredictions read_prediction_csv(std::istream& in, std::size_t vocabulary);
ParsedPredictions read_prediction_csv(const std::filesystem::path& path, std::size_t vocabulary);

/// Per-class CSV `class_id,ap,positives`; the ap field is empty for classes
/// without positives.
void write_class_ap_csv(const std::filesystem::path& path, const metrics::ClassAps& aps);
/// Reads the ap column back, mapping empty fields to 0.
std::vector<double> read_class_ap_csv(const std::filesystem::path& path);

/// Flat `key=value` summary: gap, map, k, videos, classes_evaluated.
void write_eval_summary(const std::filesystem::path& path, const metrics::EvalReport& report,
                        std::size_t videos);

}  // namespace seqtag
