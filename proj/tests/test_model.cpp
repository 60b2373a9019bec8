#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "seqtag/checkpoint.hpp"
#include "seqtag/error.hpp"
#include "seqtag/model.hpp"
#include "seqtag/synth.hpp"
#include "seqtag/trainer.hpp"
#include "test_util.hpp"

namespace seqtag {
namespace {

namespace fs = std::filesystem;
using model::ModelKind;

std::vector<data::FrameRecord> tiny_records(std::size_t n, std::size_t d, std::size_t v,
                                            Rng& rng) {
  std::vector<data::FrameRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> labels{i % v};
    if (v > 2 && i % 2 == 0) labels.push_back((i % v + 1) % v);
    std::sort(labels.begin(), labels.end());
    out.push_back({"r" + std::to_string(i), labels, random_normal({2 + (i * 3) % 5, d}, 1.0, rng)});
  }
  return out;
}

model::ModelSpec tiny_spec(ModelKind kind) {
  model::ModelSpec spec;
  spec.kind = kind;
  spec.mixtures = 2;
  spec.max_len = 12;
  spec.partition_width = 2;
  spec.encoder.state_dim = 3;
  spec.encoder.layers = 1;
  spec.attention_proj = 3;
  spec.vlad.centers = 2;
  spec.vlad.proj_size = 3;
  spec.vlad.cluster_weight = 0.5;
  spec.resnet.channels = {2, 2, 3};
  spec.resnet.blocks = {1, 1};
  spec.resnet.stem_kernel = 3;
  return spec;
}

class PipelineGradient : public ::testing::TestWithParam<ModelKind> {};

TEST_P(PipelineGradient, LossMatchesFiniteDifferences) {
  Rng rng(11);
  const std::size_t d = 3, v = 4;
  const auto records = tiny_records(3, d, v, rng);
  std::vector<const data::FrameRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  const model::Model m(tiny_spec(GetParam()), d, v);
  const model::Batch batch = model::make_batch(ptrs, m.spec().max_len, v);
  ParamSet params;
  m.init(params, rng);
  nn::GradCheckOptions options;
  options.max_coordinates = 200;
  testing::expect_grad_ok(
      params,
      [&](nn::Tape& tape, const ParamSet& p) {
        Rng step_rng(5);
        model::StepContext ctx{&step_rng, {}};
        return m.loss(tape, p, batch, ctx);
      },
      1e-4, options);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, PipelineGradient,
                         ::testing::Values(ModelKind::logistic, ModelKind::moe, ModelKind::pmoe,
                                           ModelKind::rnn, ModelKind::attention, ModelKind::vlad,
                                           ModelKind::resnet1d),
                         [](const auto& info) { return model::to_string(info.param); });

TEST(Model, PredictionsAreProbabilitiesIndependentOfBatchSize) {
  Rng rng(12);
  const std::size_t d = 3, v = 4;
  const auto records = tiny_records(9, d, v, rng);
  for (ModelKind kind : {ModelKind::logistic, ModelKind::moe, ModelKind::pmoe, ModelKind::rnn,
                         ModelKind::attention, ModelKind::vlad, ModelKind::resnet1d}) {
    const model::Model m(tiny_spec(kind), d, v);
    ParamSet params;
    m.init(params, rng);
    const Array whole = m.predict(params, records, 128);
    const Array pieces = m.predict(params, records, 4);
    EXPECT_EQ(whole, pieces) << model::to_string(kind);
    for (double s : whole.values()) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(Model, BatchMeanUsesOnlyTheKeptHead) {
  const data::FrameRecord r{"a", {0}, Array::matrix(4, 1, {1, 3, 100, 100})};
  const auto batch = model::make_batch({&r}, 2, 1);
  EXPECT_EQ(batch.mean_frames, Array::matrix(1, 1, {2.0}));
  EXPECT_EQ(batch.sequences.lengths, std::vector<std::size_t>{2});
  EXPECT_EQ(batch.labels, Array::matrix(1, 1, {1.0}));
}

TEST(Model, SpecErrorsAreCollected) {
  auto spec = tiny_spec(ModelKind::moe);
  spec.mixtures = 0;
  spec.max_len = 0;
  spec.loss = model::LossKind::smoothed_softmax;
  std::vector<std::string> errors;
  spec.collect_errors(errors);
  EXPECT_EQ(errors.size(), 3u);
  EXPECT_THROW(model::Model(spec, 3, 4), ValidationError);
  EXPECT_THROW(model::parse_model_kind("gbdt"), ValidationError);
}

data::Dataset as_dataset(std::vector<data::FrameRecord> records, std::size_t d, std::size_t v) {
  data::Dataset ds;
  ds.manifest.vocabulary = v;
  ds.manifest.dim = d;
  ds.manifest.records = records.size();
  ds.records = std::move(records);
  return ds;
}

RunConfig small_config(ModelKind kind) {
  RunConfig c;
  c.model = tiny_spec(kind);
  c.epochs = 3;
  c.batch_size = 4;
  c.seed = 7;
  return c;
}

TEST(Trainer, SameSeedGivesIdenticalLogsAndParameters) {
  Rng rng(13);
  const auto train = as_dataset(tiny_records(20, 3, 4, rng), 3, 4);
  const auto val = as_dataset(tiny_records(8, 3, 4, rng), 3, 4);
  for (ModelKind kind : {ModelKind::moe, ModelKind::rnn, ModelKind::resnet1d}) {
    auto config = small_config(kind);
    if (kind == ModelKind::rnn) config.model.encoder.variant = recur::Variant::hierarchical;
    config.model.encoder.window = 2;
    const auto a = train::fit(config, train, &val);
    const auto b = train::fit(config, train, &val);
    ASSERT_EQ(a.log.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e)
      EXPECT_EQ(train::format_epoch(a.log[e]), train::format_epoch(b.log[e]));
    EXPECT_TRUE(a.params == b.params) << model::to_string(kind);
    config.seed = 8;
    EXPECT_FALSE(train::fit(config, train, &val).params == a.params);
  }
}

TEST(Trainer, ZeroEpochsReturnsTheInitialization) {
  Rng rng(14);
  const auto train = as_dataset(tiny_records(10, 3, 4, rng), 3, 4);
  auto config = small_config(ModelKind::moe);
  config.epochs = 0;
  const auto result = train::fit(config, train, &train);
  EXPECT_TRUE(result.params == train::initial_params(config, 3, 4));
  EXPECT_EQ(result.best_epoch, 0u);
  EXPECT_TRUE(result.log.empty());
}

TEST(Trainer, KeepsTheBestValidationEpoch) {
  Rng rng(15);
  const auto train = as_dataset(tiny_records(24, 3, 4, rng), 3, 4);
  const auto val = as_dataset(tiny_records(12, 3, 4, rng), 3, 4);
  auto config = small_config(ModelKind::moe);
  config.epochs = 6;
  config.eval_every = 2;
  config.lr = 0.05;
  const auto result = train::fit(config, train, &val);
  double best = -1.0;
  std::size_t evaluated = 0;
  for (const auto& log : result.log) {
    EXPECT_EQ(log.val_gap.has_value(), log.epoch % 2 == 0);
    if (log.val_gap) {
      ++evaluated;
      best = std::max(best, *log.val_gap);
    }
  }
  EXPECT_EQ(evaluated, 3u);
  ASSERT_TRUE(result.best_gap);
  EXPECT_EQ(*result.best_gap, best);
  const model::Model m(config.resolved_model(), 3, 4);
  EXPECT_EQ(train::evaluate(m, result.params, val, config.topk).gap, best);
}

TEST(Trainer, LossDecreasesOnSeparableData) {
  Rng rng(16);
  const auto train = as_dataset(tiny_records(40, 3, 4, rng), 3, 4);
  auto config = small_config(ModelKind::logistic);
  config.epochs = 30;
  config.lr = 0.05;
  const auto result = train::fit(config, train);
  EXPECT_LT(result.log.back().train_loss, result.log.front().train_loss);
  EXPECT_EQ(result.best_epoch, 30u);
}

TEST(Trainer, LogisticReachesTheOracleOnStaticSynthetic) {
  data::SynthConfig cfg;
  auto data = data::synth_generate(cfg);
  data::standardize(data.train);
  data::standardize(data.validation);
  RunConfig config;
  config.model.kind = ModelKind::logistic;
  config.epochs = 30;
  config.lr = 0.05;
  const auto result = train::fit(config, data.train, &data.validation);
  ASSERT_TRUE(result.best_gap);
  EXPECT_GT(*result.best_gap, 0.99);
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("seqtag_model_" + name);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  Rng rng(17);
  const auto train = as_dataset(tiny_records(12, 3, 4, rng), 3, 4);
  for (ModelKind kind : {ModelKind::pmoe, ModelKind::vlad, ModelKind::resnet1d}) {
    const auto config = small_config(kind);
    const auto result = train::fit(config, train);
    const Checkpoint ck{config, 3, 4, result.params};
    const auto path = temp_path("roundtrip.json");
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    EXPECT_TRUE(back.params == result.params);
    EXPECT_EQ(back.config.entries(), config.entries());
    EXPECT_EQ(back.build_model().predict(back.params, train.records),
              ck.build_model().predict(result.params, train.records));
    fs::remove(path);
  }
}

TEST(Checkpoint, ZeroEpochCheckpointEqualsInitialization) {
  Rng rng(18);
  const auto train = as_dataset(tiny_records(6, 3, 4, rng), 3, 4);
  auto config = small_config(ModelKind::attention);
  config.epochs = 0;
  const auto path = temp_path("init.json");
  save_checkpoint(path, {config, 3, 4, train::fit(config, train).params});
  EXPECT_TRUE(load_checkpoint(path).params == train::initial_params(config, 3, 4));
  fs::remove(path);
}

TEST(Checkpoint, MismatchesAreRejected) {
  const auto config = small_config(ModelKind::moe);
  const Checkpoint ck{config, 3, 4, train::initial_params(config, 3, 4)};
  data::DatasetManifest manifest;
  manifest.dim = 3;
  manifest.vocabulary = 5;
  EXPECT_THROW(ck.check_compatible(manifest), ValidationError);
  manifest.vocabulary = 4;
  EXPECT_NO_THROW(ck.check_compatible(manifest));

  const auto path = temp_path("mismatch.json");
  save_checkpoint(path, {config, 3, 5, ck.params});
  EXPECT_THROW(load_checkpoint(path), ValidationError);

  std::ofstream(path) << "{\"format\":\"seqtag-checkpoint\"";
  EXPECT_THROW(load_checkpoint(path), DataError);
  fs::remove(path);
  EXPECT_THROW(load_checkpoint(path), DataError);
}

}  // namespace
}  // namespace seqtag
