#pragma once

#include <cstddef>
#include <cstdint>

#include "seqtag/dataio.hpp"

// Synthetic frame-level multi-label data with a known generating process.
//
// Each class is either static or temporal. A static class owns a unit
// prototype direction; a video's frames are centred on the sum of its planted
// prototypes, and the static labels are exactly the classes whose prototype
// has inner product above `threshold` with the realized mean frame. A temporal
// class owns a direction u that is added to the first half of the frames and
// subtracted from the last half; the reverse order appears as a decoy. Both
// orders leave the mean frame unchanged, so temporal labels are invisible to
// mean pooling. Planted classes follow a power law over the class index.

namespace seqtag::data {

struct SynthConfig {
  std::size_t vocabulary = 50;
  std::size_t videos = 5000;
  std::size_t min_len = 10;
  std::size_t max_len = 30;
  std::size_t dim = 32;
  std::uint64_t seed = 1;
  /// 0 keeps static labels a deterministic threshold of the mean frame; larger
  /// values add N(0, (0.5 difficulty)^2) noise to each class score before thresholding.
  double difficulty = 0.0;
  /// Share of classes that are temporal.
  double temporal_fraction = 0.0;
  double zipf_exponent = 1.5;
  /// Planted classes per video are 1 + Poisson(extra_labels).
  double extra_labels = 1.0;
  double threshold = 0.5;
  double frame_noise = 0.5;
  double pattern_amplitude = 1.0;
  double decoy_rate = 0.5;

  void validate() const;
};

struct SynthData {
  Dataset train, validation, test;
  std::vector<bool> temporal;  // per class
};

/// Deterministic given the config. Splits are 80/10/10 in generation order;
/// every manifest carries standardization fitted on the training split.
SynthData synth_generate(const SynthConfig& config);

}  // namespace seqtag::data
