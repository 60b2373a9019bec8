#include "seqtag/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "seqtag/error.hpp"
#include "seqtag/kernels.hpp"

namespace seqtag::metrics {

namespace {

bool positive(double label) { return label > 0.5; }

void require_aligned(const Array& scores, const Array& labels, const char* op) {
  require(scores.rows() == labels.rows() && scores.cols() == labels.cols(),
          std::string(op) + ": score and label shapes differ (" + shape_string(scores.shape()) +
              " vs " + shape_string(labels.shape()) + ")");
}

// AP of column `c`, reading strided entries without copying the matrix.
std::optional<double> column_ap(const Array& scores, const Array& labels, std::size_t c,
                                std::size_t& positives) {
  const std::size_t n = scores.rows(), v = scores.cols();
  std::vector<double> s(n), l(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = scores[i * v + c];
    l[i] = labels[i * v + c];
  }
  positives = static_cast<std::size_t>(std::count_if(l.begin(), l.end(), positive));
  return average_precision(s, l);
}

ClassAps finish(ClassAps out) {
  double total = 0.0;
  for (const auto& ap : out.ap)
    if (ap) {
      total += *ap;
      ++out.evaluated;
    }
  out.mean = out.evaluated == 0 ? 0.0 : total / static_cast<double>(out.evaluated);
  return out;
}

}  // namespace

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> labels) {
  require(scores.size() == labels.size(), "average_precision: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!positive(labels[order[rank]])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

namespace serial {

ClassAps mean_ap(const Array& scores, const Array& labels) {
  require_aligned(scores, labels, "mean_ap");
  const std::size_t v = scores.cols();
  ClassAps out;
  out.ap.resize(v);
  out.positives.resize(v);
  for (std::size_t c = 0; c < v; ++c) out.ap[c] = column_ap(scores, labels, c, out.positives[c]);
  return finish(std::move(out));
}

}  // namespace serial

namespace omp {

ClassAps mean_ap(const Array& scores, const Array& labels) {
  require_aligned(scores, labels, "mean_ap");
  const std::size_t v = scores.cols();
  ClassAps out;
  out.ap.resize(v);
  out.positives.resize(v);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(v); ++c) {
    const auto col = static_cast<std::size_t>(c);
    out.ap[col] = column_ap(scores, labels, col, out.positives[col]);
  }
  return finish(std::move(out));
}

}  // namespace omp

ClassAps mean_ap(const Array& scores, const Array& labels) {
  return kernels::execution() == kernels::Execution::serial ? serial::mean_ap(scores, labels)
                                                            : omp::mean_ap(scores, labels);
}

std::vector<LabelScore> top_k(std::span<const double> row, std::size_t k) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(k, row.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return row[a] > row[b] || (row[a] == row[b] && a < b);
                    });
  std::vector<LabelScore> out(keep);
  for (std::size_t i = 0; i < keep; ++i) out[i] = LabelScore{order[i], row[order[i]]};
  return out;
}

double gap_at_k(const Array& scores, const Array& labels, std::size_t k) {
  require(k >= 1, "gap_at_k: k must be at least 1");
  require_aligned(scores, labels, "gap_at_k");
  const std::size_t n = scores.rows(), v = scores.cols();
  struct Pair {
    double score;
    bool hit;
  };
  std::vector<Pair> pool;
  pool.reserve(n * std::min(k, v));
  std::size_t denominator = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row(scores.data().data() + i * v, v);
    std::size_t positives = 0;
    for (std::size_t c = 0; c < v; ++c) positives += positive(labels[i * v + c]) ? 1 : 0;
    denominator += std::min(k, positives);
    for (const LabelScore& ls : top_k(row, k))
      pool.push_back(Pair{ls.score, positive(labels[i * v + ls.label])});
  }
  if (denominator == 0) return 0.0;
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Pair& a, const Pair& b) { return a.score > b.score; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < pool.size(); ++rank) {
    if (!pool[rank].hit) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return sum / static_cast<double>(denominator);
}

EvalReport evaluate(const Array& scores, const Array& labels, std::size_t k) {
  return EvalReport{mean_ap(scores, labels), gap_at_k(scores, labels, k), k};
}

}  // namespace seqtag::metrics
