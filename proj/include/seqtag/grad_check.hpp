#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "seqtag/param_set.hpp"
#include "seqtag/tape.hpp"

namespace seqtag::nn {

/// A scalar function of a flat parameter vector together with its analytic gradient.
struct DifferentiableFunction {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct GradCheckOptions {
  /// Central-difference step is eps_scale * max(1, |theta_i|).
  double eps_scale = 1e-5;
  /// Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  /// When nonzero, checks a seeded random subset of this many coordinates.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

GradCheckReport grad_check(const DifferentiableFunction& op, std::span<const double> point,
                           const GradCheckOptions& options = {});

using GraphBuilder = std::function<Var(Tape&, const ParamSet&)>;

/// Wraps a graph over `params` (all entries, trainable or not, in name order)
/// as a DifferentiableFunction whose gradient comes from the tape.
DifferentiableFunction tape_function(const ParamSet& params, GraphBuilder build);

/// grad_check of `build` at the current values of `params`.
GradCheckReport grad_check(const ParamSet& params, const GraphBuilder& build,
                           const GradCheckOptions& options = {});

}  // namespace seqtag::nn
