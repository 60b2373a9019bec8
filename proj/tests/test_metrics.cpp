#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "seqtag/error.hpp"
#include "seqtag/kernels.hpp"
#include "seqtag/metrics.hpp"
#include "seqtag/rng.hpp"

namespace seqtag {
namespace {

// Random instance; `coarse` quantizes scores to force ties.
std::pair<Array, Array> random_instance(Rng& rng, bool coarse) {
  std::uniform_int_distribution<std::size_t> n_dist(1, 20), v_dist(1, 10);
  const std::size_t n = n_dist(rng), v = v_dist(rng);
  Array scores = random_uniform({n, v}, 0.0, 1.0, rng);
  if (coarse)
    for (auto& s : scores.values()) s = std::round(s * 4.0) / 4.0;
  Array labels = Array::matrix(n, v);
  std::bernoulli_distribution pos(0.3);
  for (auto& l : labels.values()) l = pos(rng) ? 1.0 : 0.0;
  return {scores, labels};
}

TEST(AveragePrecision, PerfectRankingIsOne) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1}, y{1, 1, 0, 0};
  EXPECT_EQ(metrics::average_precision(s, y).value(), 1.0);
}

TEST(AveragePrecision, SinglePositiveRankedSecondIsHalf) {
  const std::vector<double> s{0.9, 0.2}, y{0, 1};
  EXPECT_EQ(metrics::average_precision(s, y).value(), 0.5);
}

TEST(AveragePrecision, HandCaseFiveSixths) {
  const std::vector<double> s{0.9, 0.8, 0.7}, y{1, 0, 1};
  EXPECT_EQ(metrics::average_precision(s, y).value(), (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(metrics::average_precision(s, y).value(), 5.0 / 6.0);
}

TEST(AveragePrecision, NoPositivesIsUndefined) {
  const std::vector<double> s{0.9, 0.8}, y{0, 0};
  EXPECT_FALSE(metrics::average_precision(s, y).has_value());
}

TEST(AveragePrecision, TiesBreakByIndex) {
  const std::vector<double> s{0.5, 0.5}, y{0, 1};
  EXPECT_EQ(metrics::average_precision(s, y).value(), 0.5);
  const std::vector<double> y2{1, 0};
  EXPECT_EQ(metrics::average_precision(s, y2).value(), 1.0);
}

TEST(AveragePrecision, ReversedSinglePositiveIsOneOverN) {
  for (std::size_t n = 1; n <= 30; ++n) {
    std::vector<double> s(n), y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(n - i);
    y[n - 1] = 1.0;
    EXPECT_DOUBLE_EQ(metrics::average_precision(s, y).value(), 1.0 / static_cast<double>(n));
  }
}

TEST(AveragePrecision, InvariantUnderMonotoneTransforms) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 25;
    std::vector<double> s(n), y(n), t1(n), t2(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
      y[i] = rng() % 3 == 0 ? 1.0 : 0.0;
      t1[i] = std::exp(s[i]);
      t2[i] = 5.0 * s[i] * s[i] * s[i] - 1.0;
    }
    const auto base = metrics::average_precision(s, y);
    EXPECT_EQ(metrics::average_precision(t1, y), base);
    EXPECT_EQ(metrics::average_precision(t2, y), base);
  }
}

TEST(AveragePrecision, MatchesBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 20;
    std::vector<double> s(n), y(n);
    std::vector<bool> yb(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(std::uniform_real_distribution<double>(0.0, 1.0)(rng) * 5.0);
      yb[i] = rng() % 2 == 0;
      y[i] = yb[i] ? 1.0 : 0.0;
    }
    const double expected = oracle::average_precision(s, yb);
    const auto got = metrics::average_precision(s, y);
    if (expected < 0.0) {
      EXPECT_FALSE(got.has_value());
    } else {
      EXPECT_NEAR(got.value(), expected, 1e-12);
    }
  }
}

TEST(MeanAp, PerfectPredictorIsOne) {
  const Array labels = Array::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  EXPECT_EQ(metrics::mean_ap(labels, labels).mean, 1.0);
}

TEST(MeanAp, SingleClassEqualsItsAp) {
  const Array scores = Array::matrix(3, 1, {0.9, 0.8, 0.7});
  const Array labels = Array::matrix(3, 1, {1, 0, 1});
  const auto aps = metrics::mean_ap(scores, labels);
  EXPECT_EQ(aps.mean, aps.ap[0].value());
  EXPECT_EQ(aps.positives[0], 2u);
}

TEST(MeanAp, ExcludesClassesWithoutPositives) {
  const Array scores = Array::matrix(2, 2, {0.9, 0.1, 0.2, 0.8});
  const Array labels = Array::matrix(2, 2, {0, 0, 1, 0});
  const auto aps = metrics::mean_ap(scores, labels);
  EXPECT_FALSE(aps.ap[1].has_value());
  EXPECT_EQ(aps.evaluated, 1u);
  EXPECT_EQ(aps.mean, 0.5);
}

TEST(MeanAp, MatchesOracleAndSerialEqualsParallel) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto [scores, labels] = random_instance(rng, trial % 2 == 0);
    const auto s = metrics::serial::mean_ap(scores, labels);
    const auto p = metrics::omp::mean_ap(scores, labels);
    EXPECT_NEAR(s.mean, oracle::mean_ap(scores, labels), 1e-12);
    EXPECT_EQ(s.mean, p.mean);
    EXPECT_EQ(s.ap, p.ap);
    EXPECT_EQ(s.positives, p.positives);
    EXPECT_NEAR(metrics::gap_at_k(scores, labels, 20), oracle::gap_at_k(scores, labels, 20), 1e-12);
  }
}

TEST(MeanAp, ShapeMismatchIsRejected) {
  EXPECT_THROW(metrics::mean_ap(Array::matrix(2, 3), Array::matrix(3, 2)), ValidationError);
}

TEST(TopK, CapsAtVocabularyAndOrdersDescending) {
  const std::vector<double> row{0.2, 0.9, 0.5};
  const auto top = metrics::top_k(row, 20);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].label, 1u);
  EXPECT_EQ(top[1].label, 2u);
  EXPECT_EQ(top[2].label, 0u);
  const std::vector<double> tied{0.5, 0.5, 0.5};
  const auto t = metrics::top_k(tied, 2);
  EXPECT_EQ(t[0].label, 0u);
  EXPECT_EQ(t[1].label, 1u);
}

TEST(Gap, PerfectSeparationIsOne) {
  const Array scores = Array::matrix(2, 4, {0.9, 0.8, 0.1, 0.2, 0.3, 0.95, 0.7, 0.05});
  const Array labels = Array::matrix(2, 4, {1, 1, 0, 0, 0, 1, 1, 0});
  EXPECT_EQ(metrics::gap_at_k(scores, labels, 20), 1.0);
}

TEST(Gap, SingleVideoTopOneHitIsOne) {
  const Array scores = Array::matrix(1, 5, {0.1, 0.2, 0.9, 0.3, 0.4});
  const Array labels = Array::matrix(1, 5, {0, 0, 1, 0, 0});
  for (std::size_t k : {1u, 3u, 20u}) EXPECT_EQ(metrics::gap_at_k(scores, labels, k), 1.0);
}

TEST(Gap, MatchesPooledListOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    Array scores = random_uniform({10, 8}, 0.0, 1.0, rng);
    if (trial % 2 == 0)
      for (auto& s : scores.values()) s = std::round(s * 6.0) / 6.0;
    Array labels = Array::matrix(10, 8);
    for (auto& l : labels.values()) l = rng() % 4 == 0 ? 1.0 : 0.0;
    for (std::size_t k : {1u, 3u, 20u})
      EXPECT_NEAR(metrics::gap_at_k(scores, labels, k), oracle::gap_at_k(scores, labels, k), 1e-12);
  }
}

TEST(Gap, InvariantToVideoOrderAndClassRelabeling) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Array scores = random_uniform({12, 7}, 0.0, 1.0, rng);
    Array labels = Array::matrix(12, 7);
    for (auto& l : labels.values()) l = rng() % 3 == 0 ? 1.0 : 0.0;
    std::vector<std::size_t> rows(12), cols(7);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);
    Array s2 = scores, l2 = labels;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t c = 0; c < 7; ++c) {
        s2(i, c) = scores(rows[i], cols[c]);
        l2(i, c) = labels(rows[i], cols[c]);
      }
    EXPECT_NEAR(metrics::gap_at_k(s2, l2, 3), metrics::gap_at_k(scores, labels, 3), 1e-15);
  }
}

TEST(Gap, DenominatorCountsAtMostKPerVideo) {
  // Three true labels but k = 1: the single top pick is correct, so GAP = 1.
  const Array scores = Array::matrix(1, 4, {0.9, 0.8, 0.7, 0.1});
  const Array labels = Array::matrix(1, 4, {1, 1, 1, 0});
  EXPECT_EQ(metrics::gap_at_k(scores, labels, 1), 1.0);
  EXPECT_THROW(metrics::gap_at_k(scores, labels, 0), ValidationError);
}

TEST(Evaluate, DispatchFollowsExecutionMode) {
  Rng rng(6);
  const auto [scores, labels] = random_instance(rng, false);
  kernels::set_execution(kernels::Execution::serial);
  const auto a = metrics::evaluate(scores, labels, 5);
  kernels::set_execution(kernels::Execution::parallel);
  const auto b = metrics::evaluate(scores, labels, 5);
  EXPECT_EQ(a.classes.mean, b.classes.mean);
  EXPECT_EQ(a.gap, b.gap);
  EXPECT_EQ(a.k, 5u);
}

}  // namespace
}  // namespace seqtag
