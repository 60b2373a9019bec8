#include "seqtag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "seqtag/error.hpp"
#include "seqtag/rng.hpp"

namespace seqtag::data {

namespace {

Array unit_rows(std::size_t rows, std::size_t dim, Rng& rng) {
  Array out = random_normal({rows, dim}, 1.0, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    double norm = 0.0;
    for (double v : out.row(r)) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : out.row(r)) v /= norm;
  }
  return out;
}

// Weighted sampling of `count` distinct classes.
std::vector<std::size_t> draw_distinct(const std::vector<double>& weights, std::size_t count,
                                       Rng& rng) {
  std::vector<double> w = weights;
  std::vector<std::size_t> out;
  count = std::min(count, w.size());
  while (out.size() < count) {
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    const std::size_t c = pick(rng);
    out.push_back(c);
    w[c] = 0.0;
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  require(vocabulary >= 1, "synth: vocabulary must be at least 1");
  require(videos >= 1, "synth: videos must be at least 1");
  require(dim >= 1, "synth: dim must be at least 1");
  require(min_len >= 1 && min_len <= max_len, "synth: need 1 <= min_len <= max_len");
  require(difficulty >= 0.0, "synth: difficulty must be non-negative");
  require(temporal_fraction >= 0.0 && temporal_fraction <= 1.0,
          "synth: temporal_fraction must lie in [0, 1]");
  require(zipf_exponent >= 0.0, "synth: zipf_exponent must be non-negative");
  require(extra_labels >= 0.0, "synth: extra_labels must be non-negative");
  require(frame_noise >= 0.0, "synth: frame_noise must be non-negative");
  require(decoy_rate >= 0.0 && decoy_rate <= 1.0, "synth: decoy_rate must lie in [0, 1]");
}

SynthData synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t v = cfg.vocabulary, d = cfg.dim;

  SynthData out;
  out.temporal.assign(v, false);
  const auto temporal_count =
      static_cast<std::size_t>(std::llround(cfg.temporal_fraction * static_cast<double>(v)));
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < temporal_count; ++i) out.temporal[order[i]] = true;

  const Array prototypes = unit_rows(v, d, rng);
  const Array patterns = unit_rows(v, d, rng);
  std::vector<double> popularity(v), temporal_popularity(v, 0.0);
  for (std::size_t c = 0; c < v; ++c) {
    popularity[c] = std::pow(static_cast<double>(c + 1), -cfg.zipf_exponent);
    if (out.temporal[c]) temporal_popularity[c] = popularity[c];
  }

  std::poisson_distribution<std::size_t> extra(cfg.extra_labels);
  std::uniform_int_distribution<std::size_t> length(cfg.min_len, cfg.max_len);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution decoy(cfg.decoy_rate);

  std::vector<FrameRecord> records;
  records.reserve(cfg.videos);
  while (records.size() < cfg.videos) {
    const auto planted = draw_distinct(popularity, 1 + extra(rng), rng);
    std::vector<double> centre(d, 0.0);
    std::vector<std::pair<std::size_t, double>> sweeps;  // class, +1 forward / -1 decoy
    for (std::size_t c : planted) {
      if (out.temporal[c]) {
        sweeps.emplace_back(c, 1.0);
      } else {
        for (std::size_t k = 0; k < d; ++k) centre[k] += prototypes(c, k);
      }
    }
    if (temporal_count > 0 && decoy(rng)) {
      const std::size_t c = draw_distinct(temporal_popularity, 1, rng).front();
      if (std::none_of(planted.begin(), planted.end(), [&](std::size_t p) { return p == c; }))
        sweeps.emplace_back(c, -1.0);
    }

    const std::size_t t_len = length(rng);
    Array frames = Array::matrix(t_len, d);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t k = 0; k < d; ++k) frames(t, k) = centre[k] + cfg.frame_noise * gauss(rng);
    const std::size_t half = t_len / 2;
    for (const auto& [c, sign] : sweeps)
      for (std::size_t t = 0; t < half; ++t)
        for (std::size_t k = 0; k < d; ++k) {
          const double shift = sign * cfg.pattern_amplitude * patterns(c, k);
          frames(t, k) += shift;
          frames(t_len - 1 - t, k) -= shift;
        }

    std::vector<double> mean(d, 0.0);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t k = 0; k < d; ++k) mean[k] += frames(t, k);
    for (double& m : mean) m /= static_cast<double>(t_len);

    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < v; ++c) {
      if (out.temporal[c]) {
        if (std::any_of(planted.begin(), planted.end(), [&](std::size_t p) { return p == c; }))
          labels.push_back(c);
        continue;
      }
      double score = 0.0;
      for (std::size_t k = 0; k < d; ++k) score += mean[k] * prototypes(c, k);
      if (cfg.difficulty > 0.0) score += 0.5 * cfg.difficulty * gauss(rng);
      if (score > cfg.threshold) labels.push_back(c);
    }
    if (labels.empty()) continue;
    records.push_back(FrameRecord{"v" + std::to_string(records.size()), std::move(labels),
                                  std::move(frames)});
  }

  const std::size_t n_train = std::max<std::size_t>(1, cfg.videos * 8 / 10);
  const std::size_t n_val = std::min(cfg.videos - n_train, cfg.videos / 10);
  DatasetManifest manifest;
  manifest.vocabulary = v;
  manifest.dim = d;
  manifest.max_len = std::max<std::size_t>(300, cfg.max_len);
  const auto begin = records.begin();
  const auto split = [&](std::string name, auto first, auto last) {
    Dataset ds{manifest, std::vector<FrameRecord>(std::make_move_iterator(first),
                                                  std::make_move_iterator(last))};
    ds.manifest.split = std::move(name);
    ds.manifest.records = ds.records.size();
    return ds;
  };
  out.train = split("train", begin, begin + static_cast<std::ptrdiff_t>(n_train));
  out.validation = split("validation", begin + static_cast<std::ptrdiff_t>(n_train),
                         begin + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test = split("test", begin + static_cast<std::ptrdiff_t>(n_train + n_val), records.end());
  const FeatureScaling scaling = FeatureScaling::fit(out.train.records);
  for (Dataset* ds : {&out.train, &out.validation, &out.test}) ds->manifest.scaling = scaling;
  return out;
}

}  // namespace seqtag::data
