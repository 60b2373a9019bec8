#include "seqtag/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "seqtag/error.hpp"

namespace seqtag::nn {

GradCheckReport grad_check(const DifferentiableFunction& op, std::span<const double> point,
                           const GradCheckOptions& options) {
  const std::vector<double> analytic = op.gradient(point);
  require(analytic.size() == point.size(), "grad_check: gradient length differs from point");

  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates != 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  std::vector<double> probe(point.begin(), point.end());
  for (std::size_t i : coords) {
    const double theta = point[i];
    const double h = options.eps_scale * std::max(1.0, std::abs(theta));
    probe[i] = theta + h;
    const double up = op.value(probe);
    probe[i] = theta - h;
    const double down = op.value(probe);
    probe[i] = theta;
    const double numeric = (up - down) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), options.denominator_floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_relative_error || report.checked == 0) {
      report.max_relative_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
    ++report.checked;
  }
  return report;
}

DifferentiableFunction tape_function(const ParamSet& params, GraphBuilder build) {
  auto evaluate = [params, build](std::span<const double> flat, bool want_grad) {
    ParamSet local = params;
    local.assign_flat(flat, false);
    Tape tape;
    Var out = build(tape, local);
    std::vector<double> grad;
    if (want_grad) {
      tape.backward(out);
      for (const auto& [name, g] : tape.param_grads(local))
        grad.insert(grad.end(), g.values().begin(), g.values().end());
    }
    return std::make_pair(out.value()[0], std::move(grad));
  };
  return DifferentiableFunction{
      [evaluate](std::span<const double> flat) { return evaluate(flat, false).first; },
      [evaluate](std::span<const double> flat) { return evaluate(flat, true).second; }};
}

GradCheckReport grad_check(const ParamSet& params, const GraphBuilder& build,
                           const GradCheckOptions& options) {
  const std::vector<double> point = params.flatten(false);
  return grad_check(tape_function(params, build), point, options);
}

}  // namespace seqtag::nn
