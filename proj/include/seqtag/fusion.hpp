#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/predictions.hpp"

// Per-class AP-weighted ensemble fusion. For class c the weight of model m is
//   w_{m,c} = ap_{m,c} / ||ap_{.,c}||_p
// and the fused score is sum_m w_{m,c} * s_{m,c}.

namespace seqtag::fusion {

enum class NormKind { average, lp };

struct FusionNorm {
  NormKind kind = NormKind::lp;
  double p = 1.0;
  /// For p > 1, divide each column by its sum afterwards so weights sum to one.
  bool rescale = true;

  static FusionNorm average() { return {NormKind::average, 1.0, true}; }
  static FusionNorm lp(double p, bool rescale = true) { return {NormKind::lp, p, rescale}; }
  /// Accepts avg, l1, l2, l3 and lp:<p>.
  static FusionNorm parse(std::string_view text);
  std::string name() const;
  /// True when every weight column sums to one.
  bool normalized() const { return kind == NormKind::average || p == 1.0 || rescale; }
};

struct FusionWeights {
  Array weights;  // M x V, non-negative
  FusionNorm norm;

  std::size_t models() const { return weights.rows(); }
  std::size_t classes() const { return weights.cols(); }
};

/// `aps` is M x V with entries in [0, 1]. A column of zeros gets uniform 1/M weights.
FusionWeights per_class_weights(const Array& aps, const FusionNorm& norm);

/// Throws ValidationError unless every set has the same ids (in order) and V.
/// With normalized weights the sum is taken as s_0 + sum_m w_m (s_m - s_0),
/// so identical inputs come back bit-identical; the result is then kept
/// within [min_m s, max_m s]. Fused scores are clipped to [0, 1].
PredictionSet fuse(const std::vector<PredictionSet>& predictions, const FusionWeights& weights);

/// fuse with uniform 1/M weights.
PredictionSet average_fuse(const std::vector<PredictionSet>& predictions);

}  // namespace seqtag::fusion
