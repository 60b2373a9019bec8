#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "seqtag/adam.hpp"
#include "seqtag/error.hpp"
#include "seqtag/grad_check.hpp"
#include "seqtag/loss.hpp"
#include "seqtag/ops.hpp"
#include "test_util.hpp"

using namespace seqtag;
using namespace seqtag::nn;
using seqtag::testing::expect_grad_ok;
using seqtag::testing::probe;
using seqtag::testing::randn;

// ---- activations -----------------------------------------------------------------

TEST(Sigmoid, ScalarValues) {
  EXPECT_EQ(nn::sigmoid(0.0), 0.5);
  EXPECT_NEAR(nn::sigmoid(50.0), 1.0, 1e-15);
  // 40-digit reference evaluation of 1 / (1 + e^-0.3).
  EXPECT_NEAR(nn::sigmoid(0.3), 0.5744425168116589871520712652346517650261, 1e-16);
  EXPECT_NEAR(nn::sigmoid(-0.3), 1.0 - 0.5744425168116589871520712652346517650261, 1e-16);
}

TEST(Sigmoid, StrictlyInsideUnitIntervalForModerateInputs) {
  Rng rng(5);
  // Above ~36.7 the exact value rounds to 1.0 in double precision.
  const Array s = nn::sigmoid(random_uniform({20, 20}, -36.0, 36.0, rng));
  for (double v : s.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Softmax, Examples) {
  Array uniform = nn::softmax(Array::matrix(1, 3, {0, 0, 0}), 1);
  for (double v : uniform.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  Array saturated = nn::softmax(Array::matrix(1, 2, {1000, 0}), 1);
  EXPECT_NEAR(saturated[0], 1.0, 1e-12);
  EXPECT_NEAR(saturated[1], 0.0, 1e-12);

  // High-precision exp/normalize of (1, 2, 3).
  Array s = nn::softmax(Array::matrix(1, 3, {1, 2, 3}), 1);
  EXPECT_NEAR(s[0], 0.09003057317038045799802210148449179786793192, 3e-17);
  EXPECT_NEAR(s[1], 0.2447284710547976524729596183407627971993005, 1e-16);
  EXPECT_NEAR(s[2], 0.6652409557748218895290182801747454049327633, 2.3e-16);
}

TEST(Softmax, SumsToOneAlongAnyAxisAndIsShiftInvariant) {
  Rng rng(6);
  Array x = random_normal({3, 4, 5}, 3.0, rng);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    Array s = nn::softmax(x, axis);
    Array shifted = x;
    for (auto& v : shifted.values()) v += 17.25;
    Array s2 = nn::softmax(shifted, axis);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], s2[i], 1e-14);
    const auto& sh = x.shape();
    const std::size_t stride = axis == 0 ? 20 : (axis == 1 ? 5 : 1);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t pos = (i / stride) % sh[axis];
      if (pos != 0) continue;
      double total = 0.0;
      for (std::size_t j = 0; j < sh[axis]; ++j) total += s[i + j * stride];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

// ---- losses ---------------------------------------------------------------------

TEST(SigmoidCrossEntropy, Examples) {
  Array zeros = Array::matrix(2, 3, 0.0);
  Array labels = Array::matrix(2, 3, {1, 0, 1, 0, 0, 1});
  EXPECT_NEAR(sigmoid_cross_entropy(zeros, labels), std::log(2.0), 1e-15);
  EXPECT_NEAR(sigmoid_cross_entropy(Array::matrix(1, 1, {50.0}), Array::matrix(1, 1, {1.0})), 0.0,
              1e-20);

  Rng rng(7);
  Array logits = randn(2, 3, rng);
  double naive = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    naive += -labels[i] * std::log(p) - (1.0 - labels[i]) * std::log(1.0 - p);
  }
  EXPECT_NEAR(sigmoid_cross_entropy(logits, labels), naive / 6.0, 1e-14);
  EXPECT_GE(sigmoid_cross_entropy(logits, labels), 0.0);
}

TEST(SigmoidCrossEntropy, RejectsShapeMismatch) {
  EXPECT_THROW(sigmoid_cross_entropy(Array::matrix(2, 3), Array::matrix(3, 2)), ValidationError);
}

TEST(SigmoidCrossEntropy, IgnoredClassLeavesTotalLossUnchanged) {
  Rng rng(8);
  Array logits = randn(4, 3, rng);
  Array labels = Array::matrix(4, 3, {1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0});
  Array logits2 = Array::matrix(4, 4), labels2 = Array::matrix(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      logits2(i, j) = logits(i, j);
      labels2(i, j) = labels(i, j);
    }
    logits2(i, 3) = -50.0;
  }
  EXPECT_NEAR(sigmoid_cross_entropy(logits, labels) * 12.0,
              sigmoid_cross_entropy(logits2, labels2) * 16.0, 1e-13);
}

TEST(SigmoidCrossEntropy, DecreasesAlongNegativeGradient) {
  Rng rng(9);
  Array logits = randn(5, 4, rng);
  Array labels = Array::matrix(5, 4);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i * 7) % 3 == 0 ? 1.0 : 0.0;
  Tape tape;
  Var x = tape.variable(logits);
  Var loss = sigmoid_cross_entropy(x, labels);
  tape.backward(loss);
  Array g = tape.grad(x);
  double previous = loss.value()[0];
  for (double step : {1e-4, 1e-3, 1e-2}) {
    Array moved = logits;
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] -= step * g[i];
    const double now = sigmoid_cross_entropy(moved, labels);
    EXPECT_LT(now, loss.value()[0]);
    EXPECT_LE(now, previous);
    previous = now;
  }
}

TEST(SmoothedSoftmaxLoss, Examples) {
  Rng rng(10);
  Array logits = randn(1, 5, rng);
  Array one_hot = Array::matrix(1, 5, {0, 0, 1, 0, 0});
  const double ce = -std::log(nn::softmax(logits, 1)[2]);
  EXPECT_NEAR(smoothed_softmax_loss(logits, one_hot), ce, 1e-14);

  EXPECT_NEAR(smoothed_softmax_loss(Array::matrix(1, 4, 0.0), Array::matrix(1, 4, {1, 0, 1, 0})),
              std::log(4.0), 1e-15);

  Array many = randn(3, 4, rng);
  Array labels = Array::matrix(3, 4, {1, 1, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0});
  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double positives = 0.0, z = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      positives += labels(i, j);
      z += std::exp(many(i, j));
    }
    for (std::size_t j = 0; j < 4; ++j)
      oracle -= labels(i, j) / positives * std::log(std::exp(many(i, j)) / z);
  }
  EXPECT_NEAR(smoothed_softmax_loss(many, labels), oracle / 3.0, 1e-14);
}

TEST(SmoothedSoftmaxLoss, RejectsRowWithoutPositives) {
  EXPECT_THROW(smoothed_softmax_loss(Array::matrix(2, 3), Array::matrix(2, 3, {1, 0, 0, 0, 0, 0})),
               ValidationError);
}

TEST(MoeLogLoss, MatchesBinaryCrossEntropyOfMixtureProbability) {
  Rng rng(11);
  const std::size_t n = 3, v = 4, k = 3;
  Array gl = randn(n, v * k, rng), el = randn(n, v * k, rng, 2.0);
  Array labels = Array::matrix(n, v, {1, 0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 1});
  double naive = 0.0;
  for (std::size_t r = 0; r < n * v; ++r) {
    double z = 0.0, p = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(gl[r * k + i]);
    for (std::size_t i = 0; i < k; ++i)
      p += std::exp(gl[r * k + i]) / z / (1.0 + std::exp(-el[r * k + i]));
    naive += -labels[r] * std::log(p) - (1.0 - labels[r]) * std::log(1.0 - p);
  }
  EXPECT_NEAR(moe_log_loss(gl, el, labels, k), naive / (n * v), 1e-13);
}

TEST(MoeLogLoss, StaysFiniteWhenExpertsSaturate) {
  Array gl = Array::matrix(1, 2, {0.0, 0.0});
  Array el = Array::matrix(1, 2, {800.0, 900.0});
  const double loss = moe_log_loss(gl, el, Array::matrix(1, 1, {0.0}), 2);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 800.0 + std::log(2.0), 1e-9);
}

// ---- tape --------------------------------------------------------------------

TEST(Tape, StopGradientBlocksFlow) {
  Tape tape;
  Var x = tape.variable(Array::matrix(1, 2, {1.0, 2.0}));
  Var y = add(x, stop_gradient(scale(x, 3.0)));
  tape.backward(sum(y));
  Array g = tape.grad(x);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 1.0);
}

TEST(Tape, UnreachedParametersGetZeroGradients) {
  ParamSet params;
  params.add("a", Array::matrix(1, 2, {1, 2}));
  params.add("b", Array::matrix(2, 2, {1, 2, 3, 4}));
  Tape tape;
  Var a = tape.param(params, "a");
  tape.backward(sum(a));
  auto grads = tape.param_grads(params);
  EXPECT_EQ(grads.at("a"), Array::matrix(1, 2, {1, 1}));
  EXPECT_EQ(grads.at("b"), Array::matrix(2, 2, 0.0));
}

TEST(Tape, RejectsNonScalarBackward) {
  Tape tape;
  Var x = tape.variable(Array::matrix(2, 2));
  EXPECT_THROW(tape.backward(x), ValidationError);
}

// ---- grad_check ------------------------------------------------------------------

TEST(GradCheck, LinearMapIsExact) {
  Rng rng(12);
  ParamSet params;
  params.add("w", randn(4, 3, rng));
  // Positive inputs keep every gradient entry away from zero, so the
  // relative error measures only rounding in the central difference.
  const Array x = random_uniform({2, 4}, 0.5, 1.5, rng);
  auto report = grad_check(params, [&](Tape& t, const ParamSet& p) {
    return sum(matmul(t.constant(x), t.param(p, "w")));
  });
  EXPECT_LT(report.max_relative_error, 1e-10);
}

TEST(GradCheck, SigmoidOfSum) {
  Rng rng(13);
  ParamSet params;
  params.add("x", randn(3, 3, rng));
  auto report = grad_check(params, [](Tape& t, const ParamSet& p) {
    return sum(nn::sigmoid(t.param(p, "x")));
  });
  EXPECT_LT(report.max_relative_error, 1e-7);
}

TEST(GradCheck, DetectsAWrongGradient) {
  DifferentiableFunction f{
      [](std::span<const double> x) { return x[0] * x[0]; },
      [](std::span<const double> x) { return std::vector<double>{3.0 * x[0]}; }};
  std::vector<double> point{1.5};
  EXPECT_GT(grad_check(f, point).max_relative_error, 0.1);
}

TEST(GradCheck, EveryPrimitiveOp) {
  Rng rng(14);
  ParamSet params;
  params.add("a", randn(3, 4, rng));
  params.add("b", randn(3, 4, rng));
  params.add("w", randn(4, 5, rng));
  params.add("bias", randn(1, 4, rng));
  params.add("s", randn(3, 1, rng));
  params.add("c", randn(2, 4, rng));
  params.add("pw", randn(1, 6, rng));
  params.add("pb", randn(1, 6, rng));
  params.add("u", randn(3, 6, rng));
  params.add("v", randn(2, 6, rng));
  params.add("g", randn(3, 6, rng));
  params.add("e", randn(3, 6, rng));
  const std::vector<bool> keep{true, false, true};
  auto build = [&](Tape& t, const ParamSet& p) {
    Var a = t.param(p, "a"), b = t.param(p, "b");
    std::vector<Var> terms;
    terms.push_back(probe(matmul(a, t.param(p, "w")), 1));
    terms.push_back(probe(matmul(a, b, true, false), 2));
    terms.push_back(probe(matmul(a, b, false, true), 3));
    terms.push_back(probe(matmul(t.param(p, "w"), a, true, true), 4));
    terms.push_back(probe(mul(add(a, b), sub(a, b)), 5));
    terms.push_back(probe(add_bias(scale(a, 0.7), t.param(p, "bias")), 6));
    terms.push_back(probe(scale_rows(b, t.param(p, "s")), 7));
    terms.push_back(probe(nn::tanh(a), 8));
    terms.push_back(probe(relu(b), 9));
    terms.push_back(probe(softmax_rows(a), 10));
    terms.push_back(probe(softmax_cols(b), 11));
    terms.push_back(probe(concat_cols({a, slice_cols(b, 1, 3)}), 12));
    terms.push_back(probe(concat_rows({slice_rows(a, 1, 3), b}), 13));
    terms.push_back(probe(reshape(transpose(a), 2, 6), 14));
    terms.push_back(probe(select_rows(keep, a, b), 15));
    terms.push_back(probe(col_sum(a), 16));
    terms.push_back(probe(row_mean(b), 17));
    terms.push_back(probe(gather_cols(a, {3, 0, 0, 2}), 18));
    terms.push_back(probe(neg_sq_dist(a, t.param(p, "c")), 19));
    terms.push_back(probe(pairwise_tanh_score(t.param(p, "u"), t.param(p, "v"), t.param(p, "pb"),
                                              t.param(p, "pw")),
                          20));
    terms.push_back(probe(l2_normalize_blocks(a, 2), 21));
    terms.push_back(probe(mix(t.param(p, "g"), nn::sigmoid(t.param(p, "e")), 3), 22));
    terms.push_back(mean(b));
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    return total;
  };
  expect_grad_ok(params, build);
}

TEST(GradCheck, Losses) {
  Rng rng(15);
  ParamSet params;
  params.add("logits", randn(3, 4, rng));
  params.add("gates", randn(3, 8, rng));
  params.add("experts", randn(3, 8, rng));
  const Array labels = Array::matrix(3, 4, {1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1});
  expect_grad_ok(params, [&](Tape& t, const ParamSet& p) {
    return add(add(sigmoid_cross_entropy(t.param(p, "logits"), labels),
                   smoothed_softmax_loss(t.param(p, "logits"), labels)),
               moe_log_loss(t.param(p, "gates"), t.param(p, "experts"), labels, 2));
  });
}

// ---- ADAM ------------------------------------------------------------------------

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  Rng rng(16);
  ParamSet params;
  params.add("w", randn(3, 3, rng));
  const ParamSet before = params;
  AdamState state;
  std::map<std::string, Array> grads{{"w", Array::matrix(3, 3, 0.0)}};
  for (int i = 0; i < 50; ++i) adam_step(params, grads, state, 128);
  EXPECT_EQ(params, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet params;
  params.add("w", Array::matrix(1, 1, {2.0}));
  AdamState state;
  state.base_lr = 0.01;
  adam_step(params, {{"w", Array::matrix(1, 1, {1.0})}}, state, 1);
  // Bias-corrected m_hat / sqrt(v_hat) = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(params.at("w")[0], 2.0 - 0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, LearningRateDecaysPerExampleCount) {
  AdamState state;
  state.base_lr = 0.01;
  state.examples_seen = 4'000'000;
  EXPECT_NEAR(state.learning_rate(), 0.9 * 0.01, 1e-15);
  state.examples_seen = 2'000'000;
  EXPECT_NEAR(state.learning_rate(), 0.01 * std::sqrt(0.9), 1e-15);
  state.decay_factor = 0.1;
  state.decay_every_examples = 10'000'000;
  state.examples_seen = 10'000'000;
  EXPECT_NEAR(state.learning_rate(), 0.001, 1e-15);
}

TEST(Adam, SkipsFrozenParameters) {
  ParamSet params;
  params.add("w", Array::matrix(1, 1, {1.0}));
  params.add("frozen", Array::matrix(1, 1, {1.0}), false);
  AdamState state;
  adam_step(params, {{"w", Array::matrix(1, 1, {1.0})}}, state, 1);
  EXPECT_EQ(params.at("frozen")[0], 1.0);
  EXPECT_LT(params.at("w")[0], 1.0);
}

TEST(Adam, RejectsNonFiniteGradient) {
  ParamSet params;
  params.add("w", Array::matrix(1, 2, {1.0, 1.0}));
  AdamState state;
  EXPECT_THROW(adam_step(params, {{"w", Array::matrix(1, 2, {1.0, std::nan("")})}}, state, 1),
               NumericError);
  EXPECT_EQ(params.at("w"), Array::matrix(1, 2, {1.0, 1.0}));
  EXPECT_EQ(state.step, 0u);
}
