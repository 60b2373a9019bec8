#include "seqtag/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "seqtag/error.hpp"

namespace seqtag::fusion {

FusionNorm FusionNorm::parse(std::string_view text) {
  if (text == "avg") return average();
  if (text == "l1") return lp(1.0);
  if (text == "l2") return lp(2.0);
  if (text == "l3") return lp(3.0);
  if (text.substr(0, 3) == "lp:") {
    const double p = parse_double(text.substr(3));
    require(std::isfinite(p) && p >= 1.0, "fusion norm: p must be at least 1");
    return lp(p);
  }
  throw ValidationError("unknown fusion norm '" + std::string(text) +
                        "' (expected avg, l1, l2, l3 or lp:<p>)");
}

std::string FusionNorm::name() const {
  if (kind == NormKind::average) return "avg";
  if (p == 1.0 || p == 2.0 || p == 3.0) return "l" + format_double(p);
  return "lp:" + format_double(p);
}

FusionWeights per_class_weights(const Array& aps, const FusionNorm& norm) {
  require(aps.rank() == 2, "per_class_weights: aps must be M x V");
  require(norm.kind == NormKind::average || (std::isfinite(norm.p) && norm.p >= 1.0),
          "per_class_weights: p must be at least 1");
  for (double a : aps.values())
    require(std::isfinite(a) && a >= 0.0 && a <= 1.0, "per_class_weights: AP outside [0, 1]");
  const std::size_t m = aps.rows(), v = aps.cols();
  const double uniform = 1.0 / static_cast<double>(m);
  FusionWeights out{Array::matrix(m, v, uniform), norm};
  if (norm.kind == NormKind::average) return out;
  for (std::size_t c = 0; c < v; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += std::pow(aps(i, c), norm.p);
    if (total == 0.0) continue;
    const double scale = norm.p == 1.0 ? total : std::pow(total, 1.0 / norm.p);
    for (std::size_t i = 0; i < m; ++i) out.weights(i, c) = aps(i, c) / scale;
    if (norm.p != 1.0 && norm.rescale) {
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) sum += out.weights(i, c);
      for (std::size_t i = 0; i < m; ++i) out.weights(i, c) /= sum;
    }
  }
  return out;
}

PredictionSet fuse(const std::vector<PredictionSet>& predictions, const FusionWeights& weights) {
  require(!predictions.empty(), "fuse: no prediction sets");
  const PredictionSet& first = predictions.front();
  first.validate();
  for (std::size_t m = 1; m < predictions.size(); ++m) {
    predictions[m].validate();
    require(predictions[m].vocabulary == first.vocabulary,
            "fuse: prediction set " + std::to_string(m) + " has a different vocabulary");
    require(predictions[m].ids == first.ids,
            "fuse: prediction set " + std::to_string(m) + " is not aligned on video ids");
  }
  require(weights.models() == predictions.size() && weights.classes() == first.vocabulary,
          "fuse: weights are " + shape_string(weights.weights.shape()) + " for " +
              std::to_string(predictions.size()) + " models and " +
              std::to_string(first.vocabulary) + " classes");

  PredictionSet out{first.ids, first.vocabulary, first.scores};
  if (out.ids.empty()) return out;
  const std::size_t n = out.size(), v = out.vocabulary, models = predictions.size();
  const bool anchored = weights.norm.normalized();
  const Array& w = weights.weights;
#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < static_cast<std::int64_t>(n); ++row) {
    const auto i = static_cast<std::size_t>(row);
    for (std::size_t c = 0; c < v; ++c) {
      const double base = first.scores(i, c);
      double s;
      if (anchored) {
        s = base;
        double lo = base, hi = base;
        for (std::size_t m = 1; m < models; ++m) {
          const double x = predictions[m].scores(i, c);
          s += w(m, c) * (x - base);
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
        s = std::clamp(s, lo, hi);
      } else {
        s = 0.0;
        for (std::size_t m = 0; m < models; ++m) s += w(m, c) * predictions[m].scores(i, c);
      }
      out.scores(i, c) = std::clamp(s, 0.0, 1.0);
    }
  }
  return out;
}

PredictionSet average_fuse(const std::vector<PredictionSet>& predictions) {
  require(!predictions.empty(), "average_fuse: no prediction sets");
  const Array ones = Array::matrix(predictions.size(), predictions.front().vocabulary, 1.0);
  return fuse(predictions, per_class_weights(ones, FusionNorm::average()));
}

}  // namespace seqtag::fusion
