#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "seqtag/agg.hpp"
#include "seqtag/dataio.hpp"
#include "seqtag/moe.hpp"
#include "seqtag/param_set.hpp"
#include "seqtag/recur.hpp"
#include "seqtag/resnet1d.hpp"
#include "seqtag/rng.hpp"
#include "seqtag/tape.hpp"

// End-to-end classification pipelines: a frame aggregation stage followed by
// a classification head.
//
//   logistic   mean frame -> linear -> sigmoid
//   moe        mean frame -> MoE
//   pmoe       mean frame -> one MoE per vocabulary group
//   rnn        recurrent encoder -> MoE
//   attention  multi-hop attention pooling -> MoE
//   vlad       learnable VLAD -> MoE, plus the weighted cluster loss
//   resnet1d   frames zero-padded to max_len -> 1-D ResNet -> sigmoid

namespace seqtag::model {

enum class ModelKind { logistic, moe, pmoe, rnn, attention, vlad, resnet1d };
enum class LossKind { sigmoid, smoothed_softmax };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct ModelSpec {
  ModelKind kind = ModelKind::moe;
  /// Mixtures of the MoE head used by every kind except logistic and resnet1d.
  std::size_t mixtures = 2;
  std::size_t partition_width = 500;
  moe::PartitionScheme partition_scheme = moe::PartitionScheme::ordered;
  std::uint64_t partition_seed = 0;
  recur::EncoderSpec encoder;
  std::size_t attention_proj = 32;
  std::size_t attention_hops = 2;
  agg::VladConfig vlad;
  conv::ResNet1dSpec resnet = conv::ResNet1dSpec::desk();
  /// smoothed_softmax applies to the logit heads (logistic, resnet1d) only.
  LossKind loss = LossKind::sigmoid;
  std::size_t max_len = 300;

  /// Appends one message per problem.
  void collect_errors(std::vector<std::string>& errors) const;
};

/// Frames of a batch of records, truncated to max_len.
struct Batch {
  recur::SeqBatch sequences;
  Array mean_frames;  // N x D, mean over each record's kept frames
  Array labels;       // N x V multi-hot, empty when not needed
};

Batch make_batch(const std::vector<const data::FrameRecord*>& records, std::size_t max_len,
                 std::size_t vocabulary);

/// Mutable state threaded through one training step.
struct StepContext {
  Rng* rng = nullptr;
  std::vector<conv::NormStat> norm_stats;
};

class Model {
 public:
  Model(ModelSpec spec, std::size_t input_dim, std::size_t vocabulary);

  void init(ParamSet& params, Rng& rng) const;

  /// Training objective for one batch.
  nn::Var loss(nn::Tape& tape, const ParamSet& params, const Batch& batch,
               StepContext& ctx) const;
  /// Folds anything the step observed (batch-norm statistics) into the parameters.
  void finish_step(ParamSet& params, const StepContext& ctx) const;

  /// Inference scores in [0, 1], N x V.
  Array predict(const ParamSet& params, const Batch& batch) const;
  Array predict(const ParamSet& params, const std::vector<data::FrameRecord>& records,
                std::size_t batch_size = 128) const;

  const ModelSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t vocabulary() const { return vocabulary_; }

 private:
  nn::Var features(nn::Tape& tape, const ParamSet& params, const Batch& batch, bool training,
                   StepContext* ctx, nn::Var* aux_loss) const;
  nn::Var resnet_input(nn::Tape& tape, const Batch& batch) const;

  ModelSpec spec_;
  std::size_t input_dim_, vocabulary_;
  std::vector<recur::Encoder> encoder_;
  std::vector<agg::AttentionPoolLayer> attention_;
  std::vector<agg::VladLayer> vlad_;
  std::vector<moe::MoeHead> head_;
  std::vector<moe::ParallelMoeHead> parallel_head_;
  std::vector<conv::ResNet1d> resnet_;
};

}  // namespace seqtag::model
