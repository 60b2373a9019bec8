#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/param_set.hpp"
#include "seqtag/tape.hpp"

// Mixture-of-experts classification head and its vocabulary-partitioned
// (model-parallel) variant.
//
// Every class c owns k experts and a k-way gate:
//   score_c(x) = sum_i softmax(x Wg_c + bg_c)_i * sigmoid(x We_c,i + be_c,i)
// Gate and expert logits for all classes live in one N x (V*k) matrix with
// the k entries of a class stored contiguously.

namespace seqtag::moe {

struct MoeParams {
  std::size_t mixtures = 1;
  Array gate_weights;    // D x (V*k)
  Array gate_bias;       // 1 x (V*k)
  Array expert_weights;  // D x (V*k)
  Array expert_bias;     // 1 x (V*k)

  std::size_t input_dim() const { return gate_weights.rows(); }
  std::size_t num_classes() const { return gate_weights.cols() / mixtures; }

  static MoeParams random(std::size_t input_dim, std::size_t classes, std::size_t mixtures,
                          std::mt19937_64& rng);
  void validate() const;
};

/// Class scores in (0, 1), shape N x V. Throws ValidationError when k = 0 or shapes disagree.
Array moe_forward(const Array& x, const MoeParams& params);

/// Tape-level MoE head whose parameters live in a ParamSet under `prefix`.
class MoeHead {
 public:
  MoeHead(std::string prefix, std::size_t input_dim, std::size_t classes, std::size_t mixtures);

  void init(ParamSet& params, std::mt19937_64& rng) const;
  void store(ParamSet& params, const MoeParams& values) const;
  MoeParams extract(const ParamSet& params) const;

  nn::Var gate_logits(nn::Tape& tape, const ParamSet& params, nn::Var x) const;
  nn::Var expert_logits(nn::Tape& tape, const ParamSet& params, nn::Var x) const;
  nn::Var probabilities(nn::Tape& tape, const ParamSet& params, nn::Var x) const;
  /// Mean binary cross-entropy of the mixture prediction against multi-hot labels.
  nn::Var loss(nn::Tape& tape, const ParamSet& params, nn::Var x, const Array& labels) const;

  std::size_t classes() const { return classes_; }
  std::size_t mixtures() const { return mixtures_; }

 private:
  std::string prefix_;
  std::size_t input_dim_, classes_, mixtures_;
};

// ---- vocabulary partitioning ---------------------------------------------------

enum class PartitionScheme { ordered, random };

struct VocabularyPartition {
  std::size_t vocabulary = 0;
  PartitionScheme scheme = PartitionScheme::ordered;
  std::size_t width = 1;
  std::uint64_t seed = 0;
  /// Disjoint label groups; each sorted ascending.
  std::vector<std::vector<std::size_t>> groups;
};

/// Ordered: contiguous ranges [0,w), [w,2w), ... . Random: a seeded permutation
/// of [0,V) cut into chunks of `width`.
VocabularyPartition partition_vocabulary(std::size_t vocabulary, PartitionScheme scheme,
                                         std::size_t width, std::uint64_t seed = 0);

/// True when the groups are pairwise disjoint and their union is [0, V).
bool is_disjoint_cover(const std::vector<std::vector<std::size_t>>& groups, std::size_t vocabulary);

/// Each class is scored by the MoE of the group that contains it. `params[g]`
/// predicts `partition.groups[g]` in the group's label order.
Array pmoe_predict(const Array& x, const VocabularyPartition& partition,
                   const std::vector<MoeParams>& params);

struct RangeScores {
  std::size_t begin = 0;  // first label covered
  std::size_t end = 0;    // one past the last label covered
  Array scores;           // N x (end - begin)
};

/// Per class, the arithmetic mean of the scores of every model whose label
/// range covers it. Throws ValidationError when a class in [0, V) is uncovered.
Array blend_overlapping(const std::vector<RangeScores>& models, std::size_t vocabulary);

/// One independent MoE head per vocabulary group, scattered back to label order.
class ParallelMoeHead {
 public:
  ParallelMoeHead(std::string prefix, std::size_t input_dim, VocabularyPartition partition,
                  std::size_t mixtures);

  void init(ParamSet& params, std::mt19937_64& rng) const;
  nn::Var probabilities(nn::Tape& tape, const ParamSet& params, nn::Var x) const;
  /// Sum of group losses weighted by group size, equal to the mean over all N*V entries.
  nn::Var loss(nn::Tape& tape, const ParamSet& params, nn::Var x, const Array& labels) const;

  const VocabularyPartition& partition() const { return partition_; }
  const MoeHead& head(std::size_t group) const { return heads_[group]; }

 private:
  VocabularyPartition partition_;
  std::vector<MoeHead> heads_;
  std::vector<std::size_t> position_;  // label -> column in the concatenated group outputs
};

}  // namespace seqtag::moe
