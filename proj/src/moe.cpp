#include "seqtag/moe.hpp"

#include <algorithm>
#include <numeric>

#include "seqtag/error.hpp"
#include "seqtag/loss.hpp"
#include "seqtag/ops.hpp"
#include "seqtag/rng.hpp"

namespace seqtag::moe {

using nn::Tape;
using nn::Var;

MoeParams MoeParams::random(std::size_t input_dim, std::size_t classes, std::size_t mixtures,
                            std::mt19937_64& rng) {
  require(mixtures >= 1, "moe: mixture count must be at least 1");
  MoeParams p;
  p.mixtures = mixtures;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(input_dim));
  p.gate_weights = random_normal({input_dim, classes * mixtures}, stddev, rng);
  p.gate_bias = Array::matrix(1, classes * mixtures);
  p.expert_weights = random_normal({input_dim, classes * mixtures}, stddev, rng);
  p.expert_bias = Array::matrix(1, classes * mixtures);
  return p;
}

void MoeParams::validate() const {
  require(mixtures >= 1, "moe: mixture count must be at least 1");
  const std::size_t width = gate_weights.cols();
  require(width % mixtures == 0, "moe: gate width is not a multiple of the mixture count");
  require(expert_weights.rows() == gate_weights.rows() && expert_weights.cols() == width &&
              gate_bias.size() == width && expert_bias.size() == width,
          "moe: gate and expert parameter shapes disagree");
}

Array moe_forward(const Array& x, const MoeParams& params) {
  params.validate();
  require(x.cols() == params.input_dim(), "moe_forward: input has " + std::to_string(x.cols()) +
                                              " features, expected " +
                                              std::to_string(params.input_dim()));
  Tape tape;
  Var in = tape.constant(x.reshaped({x.rows(), x.cols()}));
  Var gates = nn::linear(in, tape.constant(params.gate_weights), tape.constant(params.gate_bias));
  Var experts =
      nn::linear(in, tape.constant(params.expert_weights), tape.constant(params.expert_bias));
  return nn::mix(gates, nn::sigmoid(experts), params.mixtures).value();
}

// ---- MoeHead --------------------------------------------------------------------

MoeHead::MoeHead(std::string prefix, std::size_t input_dim, std::size_t classes,
                 std::size_t mixtures)
    : prefix_(std::move(prefix)), input_dim_(input_dim), classes_(classes), mixtures_(mixtures) {
  require(mixtures_ >= 1, "moe: mixture count must be at least 1");
  require(input_dim_ >= 1 && classes_ >= 1, "moe: input and class counts must be positive");
}

void MoeHead::init(ParamSet& params, std::mt19937_64& rng) const {
  store(params, MoeParams::random(input_dim_, classes_, mixtures_, rng));
}

void MoeHead::store(ParamSet& params, const MoeParams& values) const {
  values.validate();
  require(values.mixtures == mixtures_ && values.input_dim() == input_dim_ &&
              values.num_classes() == classes_,
          "moe: stored parameters do not match the head's shape");
  params.add(prefix_ + "gate_w", values.gate_weights);
  params.add(prefix_ + "gate_b", values.gate_bias.reshaped({1, values.gate_bias.size()}));
  params.add(prefix_ + "expert_w", values.expert_weights);
  params.add(prefix_ + "expert_b", values.expert_bias.reshaped({1, values.expert_bias.size()}));
}

MoeParams MoeHead::extract(const ParamSet& params) const {
  MoeParams p;
  p.mixtures = mixtures_;
  p.gate_weights = params.at(prefix_ + "gate_w");
  p.gate_bias = params.at(prefix_ + "gate_b");
  p.expert_weights = params.at(prefix_ + "expert_w");
  p.expert_bias = params.at(prefix_ + "expert_b");
  return p;
}

Var MoeHead::gate_logits(Tape& tape, const ParamSet& params, Var x) const {
  return nn::linear(x, tape.param(params, prefix_ + "gate_w"), tape.param(params, prefix_ + "gate_b"));
}

Var MoeHead::expert_logits(Tape& tape, const ParamSet& params, Var x) const {
  return nn::linear(x, tape.param(params, prefix_ + "expert_w"),
                    tape.param(params, prefix_ + "expert_b"));
}

Var MoeHead::probabilities(Tape& tape, const ParamSet& params, Var x) const {
  return nn::mix(gate_logits(tape, params, x), nn::sigmoid(expert_logits(tape, params, x)),
                 mixtures_);
}

Var MoeHead::loss(Tape& tape, const ParamSet& params, Var x, const Array& labels) const {
  return nn::moe_log_loss(gate_logits(tape, params, x), expert_logits(tape, params, x), labels,
                          mixtures_);
}

// ---- partitioning ------------------------------------------------------------------

VocabularyPartition partition_vocabulary(std::size_t vocabulary, PartitionScheme scheme,
                                         std::size_t width, std::uint64_t seed) {
  require(vocabulary >= 1, "partition_vocabulary: vocabulary must be non-empty");
  require(width >= 1, "partition_vocabulary: window width must be at least 1");
  VocabularyPartition out{vocabulary, scheme, width, seed, {}};
  std::vector<std::size_t> order(vocabulary);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (scheme == PartitionScheme::random) {
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  for (std::size_t begin = 0; begin < vocabulary; begin += width) {
    const std::size_t end = std::min(vocabulary, begin + width);
    std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(group.begin(), group.end());
    out.groups.push_back(std::move(group));
  }
  return out;
}

bool is_disjoint_cover(const std::vector<std::vector<std::size_t>>& groups,
                       std::size_t vocabulary) {
  std::vector<int> seen(vocabulary, 0);
  for (const auto& group : groups)
    for (std::size_t label : group) {
      if (label >= vocabulary || seen[label]) return false;
      seen[label] = 1;
    }
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

Array pmoe_predict(const Array& x, const VocabularyPartition& partition,
                   const std::vector<MoeParams>& params) {
  require(params.size() == partition.groups.size(),
          "pmoe_predict: " + std::to_string(params.size()) + " parameter sets for " +
              std::to_string(partition.groups.size()) + " groups");
  require(is_disjoint_cover(partition.groups, partition.vocabulary),
          "pmoe_predict: partition is not a disjoint cover of the vocabulary");
  const std::size_t n = x.rows();
  Array out = Array::matrix(n, partition.vocabulary);
  for (std::size_t g = 0; g < params.size(); ++g) {
    const auto& group = partition.groups[g];
    require(params[g].num_classes() == group.size(),
            "pmoe_predict: group " + std::to_string(g) + " parameter width mismatch");
    const Array scores = moe_forward(x, params[g]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < group.size(); ++j) out(i, group[j]) = scores(i, j);
  }
  return out;
}

Array blend_overlapping(const std::vector<RangeScores>& models, std::size_t vocabulary) {
  require(!models.empty(), "blend_overlapping: no models");
  const std::size_t n = models.front().scores.rows();
  std::vector<std::size_t> cover(vocabulary, 0);
  for (const auto& m : models) {
    require(m.begin < m.end && m.end <= vocabulary, "blend_overlapping: bad label range");
    require(m.scores.rows() == n && m.scores.cols() == m.end - m.begin,
            "blend_overlapping: score matrix does not match its label range");
    for (std::size_t c = m.begin; c < m.end; ++c) ++cover[c];
  }
  for (std::size_t c = 0; c < vocabulary; ++c)
    require(cover[c] > 0, "blend_overlapping: class " + std::to_string(c) + " is not covered");
  Array out = Array::matrix(n, vocabulary);
  for (const auto& m : models)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = m.begin; c < m.end; ++c) out(i, c) += m.scores(i, c - m.begin);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < vocabulary; ++c) out(i, c) /= static_cast<double>(cover[c]);
  return out;
}

// ---- ParallelMoeHead -------------------------------------------------------------

ParallelMoeHead::ParallelMoeHead(std::string prefix, std::size_t input_dim,
                                 VocabularyPartition partition, std::size_t mixtures)
    : partition_(std::move(partition)), position_(partition_.vocabulary) {
  require(is_disjoint_cover(partition_.groups, partition_.vocabulary),
          "pmoe: partition is not a disjoint cover of the vocabulary");
  std::size_t column = 0;
  for (std::size_t g = 0; g < partition_.groups.size(); ++g) {
    heads_.emplace_back(prefix + "group" + std::to_string(g) + ".", input_dim,
                        partition_.groups[g].size(), mixtures);
    for (std::size_t label : partition_.groups[g]) position_[label] = column++;
  }
}

void ParallelMoeHead::init(ParamSet& params, std::mt19937_64& rng) const {
  for (const auto& head : heads_) head.init(params, rng);
}

Var ParallelMoeHead::probabilities(Tape& tape, const ParamSet& params, Var x) const {
  std::vector<Var> parts;
  for (const auto& head : heads_) parts.push_back(head.probabilities(tape, params, x));
  return nn::gather_cols(nn::concat_cols(parts), position_);
}

Var ParallelMoeHead::loss(Tape& tape, const ParamSet& params, Var x, const Array& labels) const {
  require(labels.cols() == partition_.vocabulary, "pmoe: label width differs from vocabulary");
  const std::size_t n = labels.rows();
  Var total;
  for (std::size_t g = 0; g < heads_.size(); ++g) {
    const auto& group = partition_.groups[g];
    Array sub = Array::matrix(n, group.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < group.size(); ++j) sub(i, j) = labels(i, group[j]);
    Var part = nn::scale(heads_[g].loss(tape, params, x, sub),
                         static_cast<double>(group.size()) /
                             static_cast<double>(partition_.vocabulary));
    total = total.valid() ? nn::add(total, part) : part;
  }
  return total;
}

}  // namespace seqtag::moe
