#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "seqtag/checkpoint.hpp"
#include "seqtag/metrics.hpp"
#include "seqtag/predictions.hpp"
#include "seqtag/rng.hpp"
#include "seqtag/trainer.hpp"

namespace seqtag {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "seqtag_cli" /
           ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Small synthetic dataset under data/.
  void synth() {
    const auto r = run({"synth", "--out", path("data"), "--set", "videos=150", "--set",
                        "vocabulary=8", "--set", "dim=6", "--set", "min_len=3", "--set",
                        "max_len=8", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  Result train(const std::string& out, std::vector<std::string> sets) {
    std::vector<std::string> args{"train", "--data", path("data/train.jsonl"), "--val",
                                  path("data/validation.jsonl"), "--out", path(out)};
    for (auto& s : sets) {
      args.push_back("--set");
      args.push_back(std::move(s));
    }
    return run(args);
  }

  fs::path dir_;
};

data::Dataset write_dataset(const std::string& file, std::size_t v, std::size_t d,
                            std::vector<data::FrameRecord> records) {
  data::Dataset ds;
  ds.manifest.vocabulary = v;
  ds.manifest.dim = d;
  ds.manifest.records = records.size();
  ds.records = std::move(records);
  data::write_records(file, ds);
  return ds;
}

TEST_F(Cli, TrainingIsDeterministicEndToEnd) {
  synth();
  for (const char* run_dir : {"a", "b"}) {
    const auto r = train(run_dir, {"model=moe", "epochs=2", "batch_size=16", "seed=3"});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(run({"predict", "--checkpoint", path(std::string(run_dir) + "/checkpoint.json"),
                   "--data", path("data/test.jsonl"), "--out",
                   path(std::string(run_dir) + "/pred.csv")})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(path("a/pred.csv")), slurp(path("b/pred.csv")));
  EXPECT_EQ(slurp(path("a/train_log.txt")), slurp(path("b/train_log.txt")));
  EXPECT_EQ(slurp(path("a/checkpoint.json")), slurp(path("b/checkpoint.json")));
  EXPECT_NE(slurp(path("a/train_log.txt")).find("val_gap"), std::string::npos);
}

TEST_F(Cli, ZeroEpochCheckpointEqualsInitialization) {
  synth();
  ASSERT_EQ(train("run", {"model=vlad", "vlad.centers=3", "epochs=0", "seed=9"}).code, 0);
  const Checkpoint ck = load_checkpoint(path("run/checkpoint.json"));
  EXPECT_TRUE(ck.params == train::initial_params(ck.config, 6, 8));
}

TEST_F(Cli, PredictCapsKAtVocabularyAndHandlesEmptyData) {
  Rng rng(1);
  std::vector<data::FrameRecord> records;
  for (std::size_t i = 0; i < 5; ++i)
    records.push_back({"v" + std::to_string(i), {i % 3}, random_normal({4, 2}, 1.0, rng)});
  write_dataset(path("three.jsonl"), 3, 2, records);
  write_dataset(path("empty.jsonl"), 3, 2, {});
  ASSERT_EQ(run({"train", "--data", path("three.jsonl"), "--out", path("run"), "--set",
                 "model=logistic", "--set", "epochs=1"})
                .code,
            0);

  ASSERT_EQ(run({"predict", "--checkpoint", path("run/checkpoint.json"), "--data",
                 path("three.jsonl"), "--out", path("p.csv")})
                .code,
            0);
  std::istringstream lines(slurp(path("p.csv")));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "VideoId,LabelConfidencePairs");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::istringstream fields(line.substr(line.find(',') + 1));
    std::string token;
    std::size_t tokens = 0;
    while (fields >> token) ++tokens;
    EXPECT_EQ(tokens, 6u) << line;
  }
  EXPECT_EQ(rows, 5u);

  ASSERT_EQ(run({"predict", "--checkpoint", path("run/checkpoint.json"), "--data",
                 path("empty.jsonl"), "--out", path("e.csv")})
                .code,
            0);
  EXPECT_EQ(slurp(path("e.csv")), "VideoId,LabelConfidencePairs\n");
}

TEST_F(Cli, RescoredCsvMatchesTruncatedInMemoryScores) {
  synth();
  ASSERT_EQ(train("run", {"model=moe", "epochs=1"}).code, 0);
  ASSERT_EQ(run({"predict", "--checkpoint", path("run/checkpoint.json"), "--data",
                 path("data/test.jsonl"), "--out", path("p.csv"), "--topk", "3"})
                .code,
            0);
  const Checkpoint ck = load_checkpoint(path("run/checkpoint.json"));
  data::Dataset test = data::read_records(path("data/test.jsonl"));
  data::standardize(test);
  Array truncated = ck.build_model().predict(ck.params, test.records);
  for (std::size_t i = 0; i < truncated.rows(); ++i) {
    const auto keep = metrics::top_k(truncated.row(i), 3);
    std::vector<double> row(truncated.cols(), 0.0);
    for (const auto& ls : keep) row[ls.label] = ls.score;
    std::copy(row.begin(), row.end(), truncated.row(i).begin());
  }
  const Array labels = data::label_matrix(test.records, 8);
  const auto parsed = read_prediction_csv(fs::path(path("p.csv")), 8);
  EXPECT_EQ(parsed.set.scores, truncated);
  EXPECT_EQ(metrics::gap_at_k(parsed.set.scores, labels, 3),
            metrics::gap_at_k(truncated, labels, 3));
}

TEST_F(Cli, EvalOfAPerfectOracleIsOne) {
  // Frames carry the multi-hot label vector, so logits 20 * x - 10 separate every class.
  const std::size_t v = 4;
  std::vector<data::FrameRecord> records;
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<std::size_t> labels{i % v};
    if (i % 3 == 0) labels.push_back(v - 1);
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    Array frames = Array::matrix(3, v);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t c : labels) frames(t, c) = 1.0;
    records.push_back({"v" + std::to_string(i), labels, frames});
  }
  write_dataset(path("d.jsonl"), v, v, records);
  Checkpoint ck;
  ck.config = RunConfig::parse("model = logistic");
  ck.input_dim = v;
  ck.vocabulary = v;
  Array w = Array::matrix(v, v);
  for (std::size_t c = 0; c < v; ++c) w(c, c) = 20.0;
  ck.params.add("logit_w", w);
  ck.params.add("logit_b", Array::matrix(1, v, -10.0));
  save_checkpoint(path("oracle.json"), ck);

  const auto r = run({"eval", "--checkpoint", path("oracle.json"), "--data", path("d.jsonl"),
                      "--out", path("ev")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string summary = slurp(path("ev/summary.txt"));
  EXPECT_NE(summary.find("gap=1\n"), std::string::npos) << summary;
  EXPECT_NE(summary.find("map=1\n"), std::string::npos) << summary;
  EXPECT_NE(slurp(path("ev/class_ap.csv")).find("class_id,ap,positives"), std::string::npos);
}

TEST_F(Cli, RandomInitializationScoresNoBetterThanTheClassPrior) {
  synth();
  ASSERT_EQ(train("run", {"model=moe", "epochs=0"}).code, 0);
  const auto r = run({"eval", "--checkpoint", path("run/checkpoint.json"), "--data",
                      path("data/train.jsonl"), "--out", path("ev")});
  ASSERT_EQ(r.code, 0) << r.err;
  const double gap = std::stod(r.out.substr(4));

  // Information-free baselines: every video scored by the class frequencies,
  // and uniformly random scores averaged over many draws.
  const data::Dataset train = data::read_records(path("data/train.jsonl"));
  const Array labels = data::label_matrix(train.records, 8);
  Array prior = Array::matrix(labels.rows(), 8);
  for (std::size_t c = 0; c < 8; ++c) {
    double count = 0.0;
    for (std::size_t i = 0; i < labels.rows(); ++i) count += labels(i, c);
    for (std::size_t i = 0; i < labels.rows(); ++i)
      prior(i, c) = count / static_cast<double>(labels.rows()) + 1e-9 * static_cast<double>(i);
  }
  const double prior_gap = metrics::gap_at_k(prior, labels, 20);
  Rng rng(2);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 200;
  for (int k = 0; k < draws; ++k) {
    const double g = metrics::gap_at_k(random_uniform({labels.rows(), 8}, 0, 1, rng), labels, 20);
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / draws, sd = std::sqrt(sum_sq / draws - mean * mean);
  EXPECT_LT(gap, prior_gap + 4 * sd);
  EXPECT_GT(gap, mean - 6 * sd);
}

TEST_F(Cli, FuseOfOneInputUnderL1IsTheInput) {
  synth();
  ASSERT_EQ(train("run", {"model=moe", "epochs=1"}).code, 0);
  ASSERT_EQ(run({"predict", "--checkpoint", path("run/checkpoint.json"), "--data",
                 path("data/validation.jsonl"), "--out", path("p.csv"), "--topk", "5"})
                .code,
            0);
  ASSERT_EQ(run({"eval", "--checkpoint", path("run/checkpoint.json"), "--data",
                 path("data/validation.jsonl"), "--out", path("ev")})
                .code,
            0);
  const auto r = run({"fuse", "--pred", path("p.csv"), "--ap", path("ev/class_ap.csv"), "--norm",
                      "l1", "--topk", "5", "--out", path("f.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("f.csv")), slurp(path("p.csv")));

  ASSERT_EQ(run({"fuse", "--pred", path("p.csv"), "--pred", path("p.csv"), "--pred",
                 path("p.csv"), "--norm", "avg", "--vocabulary", "8", "--topk", "5", "--out",
                 path("avg.csv")})
                .code,
            0);
  EXPECT_EQ(slurp(path("avg.csv")), slurp(path("p.csv")));
}

TEST_F(Cli, FuseOfTwoModelsMatchesTheWeightedSumOracle) {
  const std::size_t n = 30, v = 5;
  Rng rng(3);
  Array labels = Array::matrix(n, v);
  for (auto& x : labels.values()) x = rng() % 3 == 0 ? 1.0 : 0.0;
  std::vector<PredictionSet> sets(2);
  std::vector<Array> aps;
  for (std::size_t m = 0; m < 2; ++m) {
    sets[m].vocabulary = v;
    for (std::size_t i = 0; i < n; ++i) sets[m].ids.push_back("v" + std::to_string(i));
    sets[m].scores = random_uniform({n, v}, 0.0, 1.0, rng);
    // Model m sees the labels of the classes with parity m.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = m; c < v; c += 2) sets[m].scores(i, c) = 0.2 + 0.6 * labels(i, c);
    write_prediction_csv(path("p" + std::to_string(m) + ".csv"), sets[m], v);
    const auto classes = metrics::mean_ap(sets[m].scores, labels);
    write_class_ap_csv(path("ap" + std::to_string(m) + ".csv"), classes);
    Array ap = Array::matrix(1, v);
    for (std::size_t c = 0; c < v; ++c) ap[c] = classes.ap[c].value_or(0.0);
    aps.push_back(ap);
  }
  const auto r = run({"fuse", "--pred", path("p0.csv"), "--pred", path("p1.csv"), "--ap",
                      path("ap0.csv"), "--ap", path("ap1.csv"), "--norm", "l1", "--topk", "5",
                      "--out", path("f.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fused = read_prediction_csv(fs::path(path("f.csv")), v);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < v; ++c) {
      const double total = aps[0][c] + aps[1][c];
      const double expected =
          total > 0.0 ? (aps[0][c] * sets[0].scores(i, c) + aps[1][c] * sets[1].scores(i, c)) / total
                      : 0.5 * (sets[0].scores(i, c) + sets[1].scores(i, c));
      EXPECT_NEAR(fused.set.scores(i, c), expected, 1e-12);
    }
  const double fused_gap = metrics::gap_at_k(fused.set.scores, labels, 5);
  EXPECT_GE(fused_gap, metrics::gap_at_k(sets[0].scores, labels, 5));
  EXPECT_GE(fused_gap, metrics::gap_at_k(sets[1].scores, labels, 5));
}

TEST_F(Cli, AnalyzeWritesBothReports) {
  synth();
  const auto r = run({"analyze", "--data", path("data/train.jsonl"), "--out", path("an")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("an/label_distribution.csv")));
  std::istringstream co(slurp(path("an/cooccurrence.csv")));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(co, line)) ++rows;
  EXPECT_EQ(rows, 9u);
  EXPECT_EQ(run({"analyze", "--data", path("data/train.jsonl"), "--out", path("an"), "--top",
                 "9"})
                .code,
            1);
}

TEST_F(Cli, ExitCodesSeparateValidationFromRuntimeFailures) {
  // Config problems are reported before the (missing) data is touched.
  const auto bad = run({"train", "--data", path("missing.jsonl"), "--out", path("x"), "--set",
                        "bogus=1", "--set", "epochs=-1"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("2 problems"), std::string::npos) << bad.err;
  EXPECT_EQ(bad.err.find("missing.jsonl"), std::string::npos) << bad.err;

  EXPECT_EQ(run({"train", "--data", path("missing.jsonl"), "--out", path("x")}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"synth", "--out", path("s"), "--set", "videos=ten"}).code, 1);

  synth();
  ASSERT_EQ(train("run", {"epochs=0"}).code, 0);
  write_dataset(path("wide.jsonl"), 9, 6, {{"a", {8}, Array::matrix(2, 6)}});
  const auto mismatch = run({"eval", "--checkpoint", path("run/checkpoint.json"), "--data",
                             path("wide.jsonl"), "--out", path("ev")});
  EXPECT_EQ(mismatch.code, 1);
  EXPECT_NE(mismatch.err.find("vocabulary 9"), std::string::npos) << mismatch.err;

  std::ofstream(path("bad.csv")) << "VideoId,LabelConfidencePairs\nv1,0 0.5 1\n";
  EXPECT_EQ(run({"fuse", "--pred", path("bad.csv"), "--norm", "avg", "--vocabulary", "8",
                 "--out", path("f.csv")})
                .code,
            2);
  EXPECT_EQ(run({"fuse", "--pred", path("bad.csv"), "--norm", "l2", "--out", path("f.csv")}).code,
            1);
}

}  // namespace
}  // namespace seqtag
