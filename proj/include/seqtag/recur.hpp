#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/moe.hpp"
#include "seqtag/param_set.hpp"
#include "seqtag/rng.hpp"
#include "seqtag/tape.hpp"

// Recurrent cells and sequence encoders.
//
// Sequences are processed as time-major batches: step t is an N x D matrix
// whose row n holds frame t of sequence n. Rows past a sequence's true length
// are padding and never enter the recurrence: at those steps the state is
// carried through unchanged by row selection, so the result is bit-identical
// to running on the unpadded sequence.

namespace seqtag::recur {

enum class CellKind { gru, lstm };

/// Gate count per cell: 3 for GRU (z, r, n), 4 for LSTM (i, f, g, o).
std::size_t gate_count(CellKind kind);

/// Cell weights with gates packed along columns: w is D x (G*H), u is H x (G*H), b is 1 x (G*H).
struct CellParams {
  CellKind kind = CellKind::gru;
  Array w, u, b;

  std::size_t input_dim() const { return w.rows(); }
  std::size_t state_dim() const { return u.rows(); }

  static CellParams random(CellKind kind, std::size_t input_dim, std::size_t state_dim, Rng& rng);
  static CellParams zeros(CellKind kind, std::size_t input_dim, std::size_t state_dim);
  void validate() const;
};

/// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
/// n = tanh(x Wn + (r*h) Un + bn), h' = (1-z)*h + z*n.
Array gru_step(const Array& x, const Array& h, const CellParams& p);

/// i, f, o = s(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c'). Returns (h', c').
std::pair<Array, Array> lstm_step(const Array& x, const Array& h, const Array& c,
                                  const CellParams& p);

// ---- tape-level building blocks -----------------------------------------------

struct CellState {
  nn::Var h;
  nn::Var c;  // LSTM only
};

/// Cell weights bound to a tape, with the recurrent matrix pre-split.
struct BoundCell {
  CellKind kind = CellKind::gru;
  std::size_t state_dim = 0;
  nn::Var w, b;
  nn::Var u_gates;      // GRU: H x 2H (z, r). LSTM: the full H x 4H.
  nn::Var u_candidate;  // GRU only: H x H.
};

BoundCell bind_cell(nn::Tape& tape, CellKind kind, nn::Var w, nn::Var u, nn::Var b);
CellState zero_state(nn::Tape& tape, const BoundCell& cell, std::size_t batch);
CellState cell_step(const BoundCell& cell, nn::Var x, const CellState& state);
/// Rows with keep[n] take the new state, the others keep the old one.
CellState select_state(const std::vector<bool>& keep, const CellState& next,
                       const CellState& prev);

/// Time-major padded batch.
struct SeqBatch {
  std::vector<Array> steps;          // T entries of N x D
  std::vector<std::size_t> lengths;  // true length of each row, 1..T

  std::size_t batch_size() const { return lengths.size(); }
  std::size_t max_length() const { return steps.size(); }
  std::size_t dim() const { return steps.empty() ? 0 : steps.front().cols(); }

  /// Stacks T_i x D sequences, zero-padding to max(T_i, pad_to) steps.
  static SeqBatch from_sequences(const std::vector<Array>& sequences, std::size_t pad_to = 0);
  /// Keeps steps 0, r, 2r, ... with lengths ceil(len / r).
  SeqBatch subsampled(std::size_t rate) const;
  void validate() const;
};

/// keep[n] = t < lengths[n].
std::vector<bool> step_mask(const std::vector<std::size_t>& lengths, std::size_t t);

/// One or more stacked recurrent layers, optionally bidirectional.
class StackedRnn {
 public:
  StackedRnn(std::string prefix, CellKind kind, std::size_t input_dim, std::size_t state_dim,
             std::size_t layers = 1, bool bidirectional = false);

  void init(ParamSet& params, Rng& rng, bool trainable = true) const;
  void store_layer(ParamSet& params, std::size_t layer, bool backward, const CellParams& cell,
                   bool trainable = true) const;

  struct Result {
    std::vector<nn::Var> outputs;  // last layer's per-step outputs, output_dim wide
    nn::Var final_state;           // N x output_dim
  };
  Result run(nn::Tape& tape, const ParamSet& params, const std::vector<nn::Var>& steps,
             const std::vector<std::size_t>& lengths) const;

  std::size_t output_dim() const { return state_dim_ * (bidirectional_ ? 2 : 1); }
  std::string cell_prefix(std::size_t layer, bool backward) const;

 private:
  std::vector<nn::Var> run_direction(nn::Tape& tape, const ParamSet& params, std::size_t layer,
                                     bool backward, const std::vector<nn::Var>& steps,
                                     const std::vector<std::size_t>& lengths,
                                     nn::Var& final_h) const;

  std::string prefix_;
  CellKind kind_;
  std::size_t input_dim_, state_dim_, layers_;
  bool bidirectional_;
};

// ---- encoders -------------------------------------------------------------------

enum class Variant { stacked, context, hierarchical, multiscale };

struct EncoderSpec {
  Variant variant = Variant::stacked;
  CellKind cell = CellKind::gru;
  std::size_t layers = 2;
  bool bidirectional = false;
  std::size_t state_dim = 64;
  /// Hierarchical: frames per window, second-level state size, hidden-MoE mixtures.
  std::size_t window = 15;
  std::size_t segment_state_dim = 0;  // 0 -> state_dim
  std::size_t hidden_mixtures = 2;
  /// Keep probability for segment states during training (hierarchical only).
  double dropout_keep = 1.0;
  /// Multiscale: frame strides, each encoded by its own stacked RNN.
  std::vector<std::size_t> rates{1, 2, 4};
  /// Optional linear layer on the final state.
  bool projection = false;
  std::size_t projection_dim = 0;  // 0 -> state_dim

  void validate() const;
};

struct EncodeOptions {
  bool training = false;
  Rng* rng = nullptr;  // required for dropout when training
};

/// Sequence encoder producing one state vector per batch row.
///
/// The context variant owns a frozen single-layer GRU whose per-step output
/// (width D) is added to each frame behind a stop-gradient before the stacked
/// encoder runs. The hierarchical variant encodes windows of `window` frames,
/// maps each segment state through a mixture of linear experts, and runs a
/// second RNN over the segments.
class Encoder {
 public:
  Encoder(std::string prefix, EncoderSpec spec, std::size_t input_dim);

  void init(ParamSet& params, Rng& rng) const;
  nn::Var encode(nn::Tape& tape, const ParamSet& params, const SeqBatch& batch,
                 const EncodeOptions& options = {}) const;
  /// Inference-mode encoding on a private tape.
  Array encode(const ParamSet& params, const SeqBatch& batch) const;

  std::size_t output_dim() const;
  const EncoderSpec& spec() const { return spec_; }
  const StackedRnn& main_rnn() const { return rnns_.front(); }
  const StackedRnn& context_rnn() const { return context_.front(); }
  const StackedRnn& segment_rnn() const { return segment_.front(); }
  const moe::MoeHead& hidden_moe() const { return hidden_moe_.front(); }
  const StackedRnn& stream_rnn(std::size_t i) const { return rnns_.at(i); }
  /// Per-step context added to the frames (context variant only).
  std::vector<Array> context_outputs(const ParamSet& params, const SeqBatch& batch) const;

 private:
  std::size_t pre_projection_dim() const;
  nn::Var encode_hierarchical(nn::Tape& tape, const ParamSet& params,
                              const std::vector<nn::Var>& steps, const SeqBatch& batch,
                              const EncodeOptions& options) const;

  std::string prefix_;
  EncoderSpec spec_;
  std::size_t input_dim_;
  std::vector<StackedRnn> rnns_;     // one, or one per rate for multiscale
  std::vector<StackedRnn> context_;  // context variant
  std::vector<StackedRnn> segment_;  // hierarchical second level
  std::vector<moe::MoeHead> hidden_moe_;
};

}  // namespace seqtag::recur
