#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "seqtag/array.hpp"
#include "seqtag/param_set.hpp"

namespace seqtag::nn {

struct AdamState {
  std::uint64_t step = 0;
  std::uint64_t examples_seen = 0;
  double base_lr = 0.01;
  double decay_factor = 0.9;
  std::uint64_t decay_every_examples = 4'000'000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::map<std::string, Array> first_moment;
  std::map<std::string, Array> second_moment;

  /// base_lr * decay_factor^(examples_seen / decay_every_examples), continuous in the exponent.
  double learning_rate() const;
};

/// One bias-corrected ADAM update of every trainable parameter, then advances
/// the example counter by `batch_examples`. Throws NumericError on a
/// non-finite gradient before touching any parameter.
void adam_step(ParamSet& params, const std::map<std::string, Array>& grads, AdamState& state,
               std::uint64_t batch_examples);

}  // namespace seqtag::nn
