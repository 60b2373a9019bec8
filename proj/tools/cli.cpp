#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "seqtag/analysis.hpp"
#include "seqtag/checkpoint.hpp"
#include "seqtag/config.hpp"
#include "seqtag/dataio.hpp"
#include "seqtag/error.hpp"
#include "seqtag/fusion.hpp"
#include "seqtag/metrics.hpp"
#include "seqtag/predictions.hpp"
#include "seqtag/synth.hpp"
#include "seqtag/trainer.hpp"

namespace seqtag::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string data;
  std::string val;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::string norm = "l1";
  std::size_t topk = 20;
  std::optional<std::size_t> top;
  std::optional<std::size_t> vocabulary;
  std::vector<std::string> sets;
  std::vector<std::string> preds;
  std::vector<std::string> aps;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

data::Dataset load_dataset(const std::string& path) {
  data::Dataset ds = data::read_records(path);
  data::standardize(ds);
  return ds;
}

// ---- synth ---------------------------------------------------------------------

template <typename T>
T parse_number(const std::string& text) {
  std::size_t used = 0;
  T value{};
  try {
    if constexpr (std::is_floating_point_v<T>) {
      value = std::stod(text, &used);
    } else {
      if (!text.empty() && text.front() == '-') throw std::invalid_argument("negative");
      value = static_cast<T>(std::stoull(text, &used));
    }
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ValidationError("bad value '" + text + "'");
  return value;
}

data::SynthConfig synth_config(const Options& o) {
  data::SynthConfig cfg;
  using Setter = std::function<void(data::SynthConfig&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"vocabulary", [](auto& c, const auto& v) { c.vocabulary = parse_number<std::size_t>(v); }},
      {"videos", [](auto& c, const auto& v) { c.videos = parse_number<std::size_t>(v); }},
      {"min_len", [](auto& c, const auto& v) { c.min_len = parse_number<std::size_t>(v); }},
      {"max_len", [](auto& c, const auto& v) { c.max_len = parse_number<std::size_t>(v); }},
      {"dim", [](auto& c, const auto& v) { c.dim = parse_number<std::size_t>(v); }},
      {"seed", [](auto& c, const auto& v) { c.seed = parse_number<std::uint64_t>(v); }},
      {"difficulty", [](auto& c, const auto& v) { c.difficulty = parse_number<double>(v); }},
      {"temporal_fraction",
       [](auto& c, const auto& v) { c.temporal_fraction = parse_number<double>(v); }},
      {"zipf_exponent", [](auto& c, const auto& v) { c.zipf_exponent = parse_number<double>(v); }},
      {"extra_labels", [](auto& c, const auto& v) { c.extra_labels = parse_number<double>(v); }},
      {"threshold", [](auto& c, const auto& v) { c.threshold = parse_number<double>(v); }},
      {"frame_noise", [](auto& c, const auto& v) { c.frame_noise = parse_number<double>(v); }},
      {"pattern_amplitude",
       [](auto& c, const auto& v) { c.pattern_amplitude = parse_number<double>(v); }},
      {"decoy_rate", [](auto& c, const auto& v) { c.decoy_rate = parse_number<double>(v); }},
  };
  std::vector<std::string> lines;
  if (!o.config.empty()) {
    std::stringstream in(read_text(o.config));
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  lines.insert(lines.end(), o.sets.begin(), o.sets.end());
  std::vector<std::string> errors;
  for (const std::string& raw : lines) {
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) {
      errors.push_back("'" + raw + "': expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string key = trim(raw.substr(0, eq)), value = trim(raw.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      errors.push_back("unknown synth key '" + key + "'");
      continue;
    }
    try {
      it->second(cfg, value);
    } catch (const ValidationError& e) {
      errors.push_back(key + ": " + e.what());
    }
  }
  if (o.seed) cfg.seed = *o.seed;
  if (errors.empty()) {
    try {
      cfg.validate();
    } catch (const ValidationError& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) {
    std::string message = "invalid synth configuration:";
    for (const auto& e : errors) message += "\n  " + e;
    throw ValidationError(message);
  }
  return cfg;
}

void cmd_synth(const Options& o, std::ostream& out) {
  const data::SynthConfig cfg = synth_config(o);
  make_dir(o.out);
  const data::SynthData synth = data::synth_generate(cfg);
  const fs::path dir(o.out);
  data::write_records(dir / "train.jsonl", synth.train);
  data::write_records(dir / "validation.jsonl", synth.validation);
  data::write_records(dir / "test.jsonl", synth.test);
  std::ofstream classes(dir / "classes.csv");
  classes << "class_id,temporal\n";
  for (std::size_t c = 0; c < synth.temporal.size(); ++c)
    classes << c << ',' << (synth.temporal[c] ? 1 : 0) << '\n';
  if (!classes) throw DataError("failed writing " + (dir / "classes.csv").string());
  out << "wrote " << synth.train.size() << " train, " << synth.validation.size()
      << " validation, " << synth.test.size() << " test records to " << o.out << '\n';
}

// ---- analyze -------------------------------------------------------------------

void cmd_analyze(const Options& o, std::ostream& out) {
  const data::Dataset ds = data::read_records(o.data);
  make_dir(o.out);
  const std::size_t top = o.top.value_or(std::min<std::size_t>(50, ds.manifest.vocabulary));
  const auto dist = data::label_distribution(ds);
  const auto co = data::cooccurrence_matrix(ds, top);
  data::write_distribution_csv(fs::path(o.out) / "label_distribution.csv", dist);
  data::write_cooccurrence_csv(fs::path(o.out) / "cooccurrence.csv", co);
  out << "videos " << ds.size() << " classes " << ds.manifest.vocabulary << " label_pairs "
      << dist.pairs << '\n';
}

// ---- train ---------------------------------------------------------------------

RunConfig run_config(const Options& o) {
  std::vector<std::string> overrides = o.sets;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (!o.data.empty()) overrides.push_back("data.train=" + o.data);
  if (!o.val.empty()) overrides.push_back("data.val=" + o.val);
  return o.config.empty() ? RunConfig::parse("", overrides) : RunConfig::load(o.config, overrides);
}

void cmd_train(const Options& o, std::ostream& out) {
  const RunConfig config = run_config(o);
  require(!config.train_path.empty(), "no training data: pass --data or set data.train");
  const data::Dataset train = load_dataset(config.train_path);
  std::optional<data::Dataset> val;
  if (!config.val_path.empty()) val = load_dataset(config.val_path);

  make_dir(o.out);
  const fs::path dir(o.out);
  std::ofstream log(dir / "train_log.txt");
  if (!log) throw DataError("cannot write " + (dir / "train_log.txt").string());
  const auto result = train::fit(config, train, val ? &*val : nullptr, [&](const auto& epoch) {
    const std::string line = train::format_epoch(epoch);
    log << line << '\n';
    out << line << '\n';
  });
  log << "best_epoch " << result.best_epoch << '\n';
  if (!log) throw DataError("failed writing " + (dir / "train_log.txt").string());
  save_checkpoint(dir / "checkpoint.json",
                  {config, train.manifest.dim, train.manifest.vocabulary, result.params});
  std::ofstream(dir / "config.txt") << config.to_text();
  out << "best_epoch " << result.best_epoch << '\n';
}

// ---- eval / predict ------------------------------------------------------------

struct Scored {
  data::Dataset dataset;
  PredictionSet predictions;
};

Scored score(const Options& o) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  Scored s{load_dataset(o.data), {}};
  ck.check_compatible(s.dataset.manifest);
  s.predictions.vocabulary = ck.vocabulary;
  for (const auto& r : s.dataset.records) s.predictions.ids.push_back(r.id);
  if (s.dataset.size() > 0)
    s.predictions.scores =
        ck.build_model().predict(ck.params, s.dataset.records, ck.config.batch_size);
  return s;
}

void cmd_eval(const Options& o, std::ostream& out) {
  require(o.topk >= 1, "--topk must be at least 1");
  const Scored s = score(o);
  require(s.dataset.size() > 0, "eval: the dataset has no records");
  const auto report = metrics::evaluate(
      s.predictions.scores, data::label_matrix(s.dataset.records, s.predictions.vocabulary),
      o.topk);
  make_dir(o.out);
  write_class_ap_csv(fs::path(o.out) / "class_ap.csv", report.classes);
  write_eval_summary(fs::path(o.out) / "summary.txt", report, s.dataset.size());
  out << "gap " << format_double(report.gap) << " map " << format_double(report.classes.mean)
      << '\n';
}

void cmd_predict(const Options& o, std::ostream& out) {
  require(o.topk >= 1, "--topk must be at least 1");
  const Scored s = score(o);
  write_prediction_csv(o.out, s.predictions, o.topk);
  out << "wrote " << s.predictions.size() << " predictions to " << o.out << '\n';
}

// ---- fuse ----------------------------------------------------------------------

void cmd_fuse(const Options& o, std::ostream& out) {
  const fusion::FusionNorm norm = fusion::FusionNorm::parse(o.norm);
  require(!o.preds.empty(), "fuse: pass at least one --pred file");
  const bool weighted = norm.kind == fusion::NormKind::lp;
  if (weighted)
    require(o.aps.size() == o.preds.size(),
            "fuse: norm " + norm.name() + " needs one --ap file per --pred file");
  else
    require(o.aps.empty() || o.aps.size() == o.preds.size(),
            "fuse: pass one --ap file per --pred file or none");

  std::vector<std::vector<double>> aps;
  for (const auto& path : o.aps) aps.push_back(read_class_ap_csv(path));
  std::size_t v = o.vocabulary.value_or(aps.empty() ? 0 : aps.front().size());
  require(v >= 1, "fuse: pass --vocabulary or --ap files to fix the vocabulary size");
  for (std::size_t m = 0; m < aps.size(); ++m)
    require(aps[m].size() == v, "fuse: " + o.aps[m] + " has " + std::to_string(aps[m].size()) +
                                    " classes, expected " + std::to_string(v));

  std::vector<PredictionSet> sets;
  Array listed;
  for (const auto& path : o.preds) {
    ParsedPredictions parsed = read_prediction_csv(fs::path(path), v);
    if (sets.empty()) {
      listed = parsed.listed;
    } else if (parsed.listed.same_shape(listed)) {
      for (std::size_t i = 0; i < listed.size(); ++i)
        listed[i] = std::max(listed[i], parsed.listed[i]);
    }
    sets.push_back(std::move(parsed.set));
  }

  PredictionSet fused;
  if (weighted) {
    Array ap_matrix = Array::matrix(aps.size(), v);
    for (std::size_t m = 0; m < aps.size(); ++m)
      std::copy(aps[m].begin(), aps[m].end(), ap_matrix.row(m).begin());
    fused = fusion::fuse(sets, fusion::per_class_weights(ap_matrix, norm));
  } else {
    fused = fusion::average_fuse(sets);
  }
  write_prediction_csv(o.out, fused, o.topk, fused.size() > 0 ? &listed : nullptr);
  out << "fused " << sets.size() << " prediction files (" << norm.name() << ") into " << o.out
      << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-label video classification from frame features"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--set", o.sets, "key=value override, repeatable");
    sub->add_option("--seed", o.seed, "random seed");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_config(synth);
  synth->add_option("--out", o.out, "output directory")->required();

  CLI::App* analyze = app.add_subcommand("analyze", "label distribution and co-occurrence");
  analyze->add_option("--data", o.data, "dataset file")->required();
  analyze->add_option("--out", o.out, "output directory")->required();
  analyze->add_option("--top", o.top, "classes in the co-occurrence matrix (default 50)");

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_config(train);
  train->add_option("--data", o.data, "training dataset (overrides data.train)");
  train->add_option("--val", o.val, "validation dataset (overrides data.val)");
  train->add_option("--out", o.out, "output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "GAP and mAP of a checkpoint on a dataset");
  CLI::App* predict = app.add_subcommand("predict", "write top-k predictions as CSV");
  for (CLI::App* sub : {eval, predict}) {
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    sub->add_option("--data", o.data, "dataset file")->required();
    sub->add_option("--topk", o.topk, "predictions per video (default 20)");
  }
  eval->add_option("--out", o.out, "output directory")->required();
  predict->add_option("--out", o.out, "output CSV")->required();

  CLI::App* fuse = app.add_subcommand("fuse", "AP-weighted fusion of prediction CSVs");
  fuse->add_option("--pred", o.preds, "prediction CSV, repeatable")->required();
  fuse->add_option("--ap", o.aps, "per-class AP CSV for the matching --pred, repeatable");
  fuse->add_option("--norm", o.norm, "avg, l1, l2, l3 or lp:<p> (default l1)");
  fuse->add_option("--vocabulary", o.vocabulary, "number of classes when no --ap is given");
  fuse->add_option("--topk", o.topk, "predictions per video (default 20)");
  fuse->add_option("--out", o.out, "output CSV")->required();

  std::vector<const char*> argv{"seqtag"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) cmd_synth(o, out);
    if (*analyze) cmd_analyze(o, out);
    if (*train) cmd_train(o, out);
    if (*eval) cmd_eval(o, out);
    if (*predict) cmd_predict(o, out);
    if (*fuse) cmd_fuse(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace seqtag::cli
