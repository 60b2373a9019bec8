#include "seqtag/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "seqtag/error.hpp"
#include "seqtag/predictions.hpp"

namespace seqtag::data {

LabelDistribution label_distribution(const Dataset& dataset) {
  const std::size_t v = dataset.manifest.vocabulary;
  LabelDistribution out;
  out.counts.assign(v, 0);
  for (const auto& r : dataset.records)
    for (std::size_t c : r.labels) {
      require(c < v, "label_distribution: label outside vocabulary");
      ++out.counts[c];
    }
  out.pairs = std::accumulate(out.counts.begin(), out.counts.end(), std::size_t{0});
  out.coverage.assign(v + 1, 0.0);
  std::size_t below = 0;
  for (std::size_t c = 0; c <= v; ++c) {
    out.coverage[c] =
        out.pairs == 0 ? 0.0 : static_cast<double>(below) / static_cast<double>(out.pairs);
    if (c < v) below += out.counts[c];
  }
  return out;
}

Cooccurrence cooccurrence_matrix(const Dataset& dataset, std::size_t top) {
  const std::size_t v = dataset.manifest.vocabulary;
  require(top >= 1 && top <= v, "cooccurrence_matrix: top must lie in [1, V]");
  const auto dist = label_distribution(dataset);
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist.counts[a] > dist.counts[b];
  });
  Cooccurrence out{std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top)),
                   Array::matrix(top, top)};
  std::vector<std::size_t> slot(v, top);
  for (std::size_t i = 0; i < top; ++i) slot[out.classes[i]] = i;
  std::vector<std::size_t> present;
  for (const auto& r : dataset.records) {
    present.clear();
    for (std::size_t c : r.labels)
      if (slot[c] < top) present.push_back(slot[c]);
    for (std::size_t a : present)
      for (std::size_t b : present) out.counts(a, b) += 1.0;
  }
  return out;
}

void write_distribution_csv(const std::filesystem::path& path, const LabelDistribution& dist) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "class_id,count,coverage\n";
  for (std::size_t c = 0; c < dist.counts.size(); ++c)
    out << c << ',' << dist.counts[c] << ',' << format_double(dist.coverage[c]) << '\n';
  out << dist.counts.size() << ",," << format_double(dist.coverage.back()) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

void write_cooccurrence_csv(const std::filesystem::path& path, const Cooccurrence& co) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "class_id";
  for (std::size_t c : co.classes) out << ',' << c;
  out << '\n';
  for (std::size_t a = 0; a < co.classes.size(); ++a) {
    out << co.classes[a];
    for (std::size_t b = 0; b < co.classes.size(); ++b)
      out << ',' << static_cast<std::size_t>(co.counts(a, b));
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace seqtag::data
