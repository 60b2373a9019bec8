#pragma once

#include <gtest/gtest.h>

#include <random>

#include "seqtag/array.hpp"
#include "seqtag/grad_check.hpp"
#include "seqtag/ops.hpp"
#include "seqtag/rng.hpp"

namespace seqtag::testing {

inline Array randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0) {
  return random_normal({rows, cols}, stddev, rng);
}

/// sum(out .* R) for a fixed random R, so every output entry reaches the gradient.
inline nn::Var probe(nn::Var out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return nn::weighted_sum(out, random_normal({out.rows(), out.cols()}, 1.0, rng));
}

inline void expect_grad_ok(const ParamSet& params, const nn::GraphBuilder& build,
                           double tolerance = 1e-4, nn::GradCheckOptions options = {}) {
  const auto report = nn::grad_check(params, build, options);
  EXPECT_LT(report.max_relative_error, tolerance)
      << "worst coordinate " << report.worst_index << ": analytic " << report.analytic_at_worst
      << " vs numeric " << report.numeric_at_worst;
  EXPECT_GT(report.checked, 0u);
}

inline void expect_arrays_near(const Array& a, const Array& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace seqtag::testing
