#include "seqtag/recur.hpp"

#include <algorithm>

#include "seqtag/error.hpp"
#include "seqtag/ops.hpp"

namespace seqtag::recur {

using nn::Tape;
using nn::Var;

std::size_t gate_count(CellKind kind) { return kind == CellKind::gru ? 3 : 4; }

CellParams CellParams::random(CellKind kind, std::size_t input_dim, std::size_t state_dim,
                              Rng& rng) {
  require(input_dim >= 1 && state_dim >= 1, "rnn: input and state dims must be positive");
  const std::size_t width = gate_count(kind) * state_dim;
  CellParams p;
  p.kind = kind;
  p.w = glorot(input_dim, width, rng);
  p.u = glorot(state_dim, width, rng);
  p.b = Array::matrix(1, width);
  return p;
}

CellParams CellParams::zeros(CellKind kind, std::size_t input_dim, std::size_t state_dim) {
  require(input_dim >= 1 && state_dim >= 1, "rnn: input and state dims must be positive");
  const std::size_t width = gate_count(kind) * state_dim;
  return CellParams{kind, Array::matrix(input_dim, width), Array::matrix(state_dim, width),
                    Array::matrix(1, width)};
}

void CellParams::validate() const {
  const std::size_t h = u.rows();
  const std::size_t width = gate_count(kind) * h;
  require(h >= 1, "rnn: state dim must be at least 1");
  require(u.cols() == width && w.cols() == width && b.size() == width,
          "rnn: cell parameter shapes disagree with the gate layout");
}

namespace {

BoundCell bind_constants(Tape& tape, const CellParams& p) {
  p.validate();
  return bind_cell(tape, p.kind, tape.constant(p.w), tape.constant(p.u),
                   tape.constant(p.b.reshaped({1, p.b.size()})));
}

Array as_row_matrix(const Array& a, std::size_t cols) {
  return a.rank() == 1 ? a.reshaped({1, a.size()}) : a.reshaped({a.size() / cols, cols});
}

}  // namespace

Array gru_step(const Array& x, const Array& h, const CellParams& p) {
  require(p.kind == CellKind::gru, "gru_step: parameters are not a GRU cell");
  p.validate();
  require(x.cols() == p.input_dim() && h.cols() == p.state_dim() && x.rows() == h.rows(),
          "gru_step: input or state dims do not match the cell");
  Tape tape;
  const BoundCell cell = bind_constants(tape, p);
  CellState s{tape.constant(as_row_matrix(h, p.state_dim())), {}};
  return cell_step(cell, tape.constant(as_row_matrix(x, p.input_dim())), s).h.value();
}

std::pair<Array, Array> lstm_step(const Array& x, const Array& h, const Array& c,
                                  const CellParams& p) {
  require(p.kind == CellKind::lstm, "lstm_step: parameters are not an LSTM cell");
  p.validate();
  require(x.cols() == p.input_dim() && h.cols() == p.state_dim() && c.cols() == p.state_dim() &&
              x.rows() == h.rows() && h.rows() == c.rows(),
          "lstm_step: input or state dims do not match the cell");
  Tape tape;
  const BoundCell cell = bind_constants(tape, p);
  CellState s{tape.constant(as_row_matrix(h, p.state_dim())),
              tape.constant(as_row_matrix(c, p.state_dim()))};
  const CellState next = cell_step(cell, tape.constant(as_row_matrix(x, p.input_dim())), s);
  return {next.h.value(), next.c.value()};
}

BoundCell bind_cell(Tape& tape, CellKind kind, Var w, Var u, Var b) {
  (void)tape;
  BoundCell cell;
  cell.kind = kind;
  cell.state_dim = u.rows();
  cell.w = w;
  cell.b = b;
  if (kind == CellKind::gru) {
    cell.u_gates = nn::slice_cols(u, 0, 2 * cell.state_dim);
    cell.u_candidate = nn::slice_cols(u, 2 * cell.state_dim, 3 * cell.state_dim);
  } else {
    cell.u_gates = u;
  }
  return cell;
}

CellState zero_state(Tape& tape, const BoundCell& cell, std::size_t batch) {
  CellState s;
  s.h = tape.constant(Array::matrix(batch, cell.state_dim));
  if (cell.kind == CellKind::lstm) s.c = tape.constant(Array::matrix(batch, cell.state_dim));
  return s;
}

CellState cell_step(const BoundCell& cell, Var x, const CellState& state) {
  const std::size_t h = cell.state_dim;
  require(x.cols() == cell.w.rows(), "rnn: frame width does not match the cell input dim");
  require(state.h.cols() == h && state.h.rows() == x.rows(), "rnn: state shape mismatch");
  Var xw = nn::add_bias(nn::matmul(x, cell.w), cell.b);
  if (cell.kind == CellKind::gru) {
    Var zr = nn::sigmoid(nn::add(nn::slice_cols(xw, 0, 2 * h), nn::matmul(state.h, cell.u_gates)));
    Var z = nn::slice_cols(zr, 0, h);
    Var r = nn::slice_cols(zr, h, 2 * h);
    Var n = nn::tanh(nn::add(nn::slice_cols(xw, 2 * h, 3 * h),
                             nn::matmul(nn::mul(r, state.h), cell.u_candidate)));
    return CellState{nn::add(state.h, nn::mul(z, nn::sub(n, state.h))), {}};
  }
  Var pre = nn::add(xw, nn::matmul(state.h, cell.u_gates));
  Var i = nn::sigmoid(nn::slice_cols(pre, 0, h));
  Var f = nn::sigmoid(nn::slice_cols(pre, h, 2 * h));
  Var g = nn::tanh(nn::slice_cols(pre, 2 * h, 3 * h));
  Var o = nn::sigmoid(nn::slice_cols(pre, 3 * h, 4 * h));
  Var c = nn::add(nn::mul(f, state.c), nn::mul(i, g));
  return CellState{nn::mul(o, nn::tanh(c)), c};
}

CellState select_state(const std::vector<bool>& keep, const CellState& next,
                       const CellState& prev) {
  CellState s;
  s.h = nn::select_rows(keep, next.h, prev.h);
  if (next.c.valid()) s.c = nn::select_rows(keep, next.c, prev.c);
  return s;
}

// ---- SeqBatch -------------------------------------------------------------------

SeqBatch SeqBatch::from_sequences(const std::vector<Array>& sequences, std::size_t pad_to) {
  require(!sequences.empty(), "SeqBatch: no sequences");
  const std::size_t d = sequences.front().cols();
  std::size_t t_max = pad_to;
  for (const auto& s : sequences) {
    require(s.rows() >= 1, "SeqBatch: empty sequence");
    require(s.cols() == d, "SeqBatch: sequences differ in feature dim");
    t_max = std::max(t_max, s.rows());
  }
  SeqBatch batch;
  batch.steps.assign(t_max, Array::matrix(sequences.size(), d));
  for (std::size_t n = 0; n < sequences.size(); ++n) {
    const Array& s = sequences[n];
    batch.lengths.push_back(s.rows());
    for (std::size_t t = 0; t < s.rows(); ++t)
      std::copy_n(s.data().begin() + t * d, d, batch.steps[t].data().begin() + n * d);
  }
  return batch;
}

SeqBatch SeqBatch::subsampled(std::size_t rate) const {
  require(rate >= 1, "subsample: rate must be at least 1");
  SeqBatch out;
  for (std::size_t t = 0; t < steps.size(); t += rate) out.steps.push_back(steps[t]);
  for (std::size_t len : lengths) out.lengths.push_back((len + rate - 1) / rate);
  return out;
}

void SeqBatch::validate() const {
  require(!steps.empty() && !lengths.empty(), "SeqBatch: empty batch");
  for (const auto& s : steps)
    require(s.rows() == lengths.size() && s.cols() == dim(), "SeqBatch: step shape mismatch");
  for (std::size_t len : lengths)
    require(len >= 1 && len <= steps.size(), "SeqBatch: length outside [1, T]");
}

std::vector<bool> step_mask(const std::vector<std::size_t>& lengths, std::size_t t) {
  std::vector<bool> keep(lengths.size());
  for (std::size_t n = 0; n < lengths.size(); ++n) keep[n] = t < lengths[n];
  return keep;
}

// ---- StackedRnn -------------------------------------------------------------------

StackedRnn::StackedRnn(std::string prefix, CellKind kind, std::size_t input_dim,
                       std::size_t state_dim, std::size_t layers, bool bidirectional)
    : prefix_(std::move(prefix)),
      kind_(kind),
      input_dim_(input_dim),
      state_dim_(state_dim),
      layers_(layers),
      bidirectional_(bidirectional) {
  require(input_dim_ >= 1 && state_dim_ >= 1, "rnn: input and state dims must be positive");
  require(layers_ >= 1, "rnn: need at least one layer");
}

std::string StackedRnn::cell_prefix(std::size_t layer, bool backward) const {
  return prefix_ + "l" + std::to_string(layer) + (backward ? ".bw." : ".fw.");
}

void StackedRnn::store_layer(ParamSet& params, std::size_t layer, bool backward,
                             const CellParams& cell, bool trainable) const {
  cell.validate();
  const std::size_t in = layer == 0 ? input_dim_ : output_dim();
  require(cell.kind == kind_ && cell.input_dim() == in && cell.state_dim() == state_dim_,
          "rnn: stored cell does not match the layer shape");
  const std::string p = cell_prefix(layer, backward);
  params.add(p + "w", cell.w, trainable);
  params.add(p + "u", cell.u, trainable);
  params.add(p + "b", cell.b.reshaped({1, cell.b.size()}), trainable);
}

void StackedRnn::init(ParamSet& params, Rng& rng, bool trainable) const {
  for (std::size_t l = 0; l < layers_; ++l) {
    const std::size_t in = l == 0 ? input_dim_ : output_dim();
    for (bool backward : {false, true}) {
      if (backward && !bidirectional_) continue;
      store_layer(params, l, backward, CellParams::random(kind_, in, state_dim_, rng), trainable);
    }
  }
}

std::vector<Var> StackedRnn::run_direction(Tape& tape, const ParamSet& params, std::size_t layer,
                                           bool backward, const std::vector<Var>& steps,
                                           const std::vector<std::size_t>& lengths,
                                           Var& final_h) const {
  const std::string p = cell_prefix(layer, backward);
  const BoundCell cell = bind_cell(tape, kind_, tape.param(params, p + "w"),
                                   tape.param(params, p + "u"), tape.param(params, p + "b"));
  CellState state = zero_state(tape, cell, lengths.size());
  std::vector<Var> outputs(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::size_t t = backward ? steps.size() - 1 - i : i;
    state = select_state(step_mask(lengths, t), cell_step(cell, steps[t], state), state);
    outputs[t] = state.h;
  }
  final_h = state.h;
  return outputs;
}

StackedRnn::Result StackedRnn::run(Tape& tape, const ParamSet& params,
                                   const std::vector<Var>& steps,
                                   const std::vector<std::size_t>& lengths) const {
  require(!steps.empty(), "rnn: empty sequence");
  std::vector<Var> inputs = steps;
  Var final_state;
  for (std::size_t l = 0; l < layers_; ++l) {
    Var fw_final;
    std::vector<Var> outputs = run_direction(tape, params, l, false, inputs, lengths, fw_final);
    final_state = fw_final;
    if (bidirectional_) {
      Var bw_final;
      std::vector<Var> bw = run_direction(tape, params, l, true, inputs, lengths, bw_final);
      for (std::size_t t = 0; t < outputs.size(); ++t)
        outputs[t] = nn::concat_cols({outputs[t], bw[t]});
      final_state = nn::concat_cols({fw_final, bw_final});
    }
    inputs = std::move(outputs);
  }
  return Result{std::move(inputs), final_state};
}

// ---- Encoder ----------------------------------------------------------------------

void EncoderSpec::validate() const {
  require(state_dim >= 1, "encoder: state_dim must be at least 1");
  require(layers >= 1, "encoder: layers must be at least 1");
  require(dropout_keep > 0.0 && dropout_keep <= 1.0, "encoder: dropout keep must be in (0, 1]");
  if (variant == Variant::hierarchical) {
    require(window >= 1, "encoder: window must be at least 1");
    require(hidden_mixtures >= 1, "encoder: hidden mixtures must be at least 1");
  }
  if (variant == Variant::multiscale) {
    require(!rates.empty(), "encoder: multiscale needs at least one rate");
    std::vector<std::size_t> sorted = rates;
    std::sort(sorted.begin(), sorted.end());
    require(sorted.front() >= 1, "encoder: rates must be at least 1");
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "encoder: rates must be distinct");
  }
}

Encoder::Encoder(std::string prefix, EncoderSpec spec, std::size_t input_dim)
    : prefix_(std::move(prefix)), spec_(std::move(spec)), input_dim_(input_dim) {
  spec_.validate();
  require(input_dim_ >= 1, "encoder: input dim must be positive");
  const std::size_t h = spec_.state_dim;
  switch (spec_.variant) {
    case Variant::stacked:
      rnns_.emplace_back(prefix_ + "rnn.", spec_.cell, input_dim_, h, spec_.layers,
                         spec_.bidirectional);
      break;
    case Variant::context:
      rnns_.emplace_back(prefix_ + "rnn.", spec_.cell, input_dim_, h, spec_.layers,
                         spec_.bidirectional);
      context_.emplace_back(prefix_ + "context.", CellKind::gru, input_dim_, input_dim_, 1, false);
      break;
    case Variant::hierarchical: {
      rnns_.emplace_back(prefix_ + "rnn.", spec_.cell, input_dim_, h, 1, spec_.bidirectional);
      const std::size_t seg_in = rnns_.front().output_dim();
      const std::size_t seg_h = spec_.segment_state_dim == 0 ? h : spec_.segment_state_dim;
      hidden_moe_.emplace_back(prefix_ + "hidden_moe.", seg_in, seg_in, spec_.hidden_mixtures);
      segment_.emplace_back(prefix_ + "segment.", spec_.cell, seg_in, seg_h, 1, false);
      break;
    }
    case Variant::multiscale:
      for (std::size_t r : spec_.rates)
        rnns_.emplace_back(prefix_ + "rate" + std::to_string(r) + ".", spec_.cell, input_dim_, h,
                           spec_.layers, spec_.bidirectional);
      break;
  }
}

std::size_t Encoder::pre_projection_dim() const {
  if (spec_.variant == Variant::hierarchical) return segment_.front().output_dim();
  std::size_t total = 0;
  for (const auto& rnn : rnns_) total += rnn.output_dim();
  return total;
}

std::size_t Encoder::output_dim() const {
  if (!spec_.projection) return pre_projection_dim();
  return spec_.projection_dim == 0 ? spec_.state_dim : spec_.projection_dim;
}

void Encoder::init(ParamSet& params, Rng& rng) const {
  for (const auto& rnn : rnns_) rnn.init(params, rng);
  for (const auto& ctx : context_) ctx.init(params, rng, false);
  for (const auto& head : hidden_moe_) head.init(params, rng);
  for (const auto& seg : segment_) seg.init(params, rng);
  if (spec_.projection) {
    params.add(prefix_ + "proj_w", glorot(pre_projection_dim(), output_dim(), rng));
    params.add(prefix_ + "proj_b", Array::matrix(1, output_dim()));
  }
}

Var Encoder::encode_hierarchical(Tape& tape, const ParamSet& params,
                                 const std::vector<Var>& steps, const SeqBatch& batch,
                                 const EncodeOptions& options) const {
  const std::size_t w = spec_.window;
  const std::size_t windows = (steps.size() + w - 1) / w;
  const StackedRnn& first = rnns_.front();
  const moe::MoeHead& moe = hidden_moe_.front();
  std::vector<Var> segments;
  std::vector<std::size_t> segment_lengths;
  for (std::size_t len : batch.lengths) segment_lengths.push_back((len + w - 1) / w);
  for (std::size_t s = 0; s < windows; ++s) {
    const std::size_t begin = s * w;
    const std::size_t end = std::min(begin + w, steps.size());
    std::vector<Var> window(steps.begin() + static_cast<std::ptrdiff_t>(begin),
                            steps.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<std::size_t> local;
    for (std::size_t len : batch.lengths) local.push_back(len > begin ? len - begin : 0);
    Var state = first.run(tape, params, window, local).final_state;
    if (options.training && spec_.dropout_keep < 1.0) {
      require(options.rng != nullptr, "encoder: dropout needs an rng");
      state = nn::dropout(state, spec_.dropout_keep, *options.rng);
    }
    Var gates = moe.gate_logits(tape, params, state);
    Var experts = moe.expert_logits(tape, params, state);
    segments.push_back(nn::mix(gates, experts, moe.mixtures()));
  }
  return segment_.front().run(tape, params, segments, segment_lengths).final_state;
}

Var Encoder::encode(Tape& tape, const ParamSet& params, const SeqBatch& batch,
                    const EncodeOptions& options) const {
  batch.validate();
  require(batch.dim() == input_dim_, "encoder: frames have " + std::to_string(batch.dim()) +
                                         " features, expected " + std::to_string(input_dim_));
  std::vector<Var> steps;
  steps.reserve(batch.max_length());
  for (const auto& s : batch.steps) steps.push_back(tape.constant(s));

  Var out;
  switch (spec_.variant) {
    case Variant::stacked:
      out = rnns_.front().run(tape, params, steps, batch.lengths).final_state;
      break;
    case Variant::context: {
      const auto ctx = context_.front().run(tape, params, steps, batch.lengths).outputs;
      std::vector<Var> injected;
      injected.reserve(steps.size());
      for (std::size_t t = 0; t < steps.size(); ++t)
        injected.push_back(nn::add(steps[t], nn::stop_gradient(ctx[t])));
      out = rnns_.front().run(tape, params, injected, batch.lengths).final_state;
      break;
    }
    case Variant::hierarchical:
      out = encode_hierarchical(tape, params, steps, batch, options);
      break;
    case Variant::multiscale: {
      std::vector<Var> finals;
      for (std::size_t i = 0; i < spec_.rates.size(); ++i) {
        const std::size_t r = spec_.rates[i];
        std::vector<Var> stream;
        for (std::size_t t = 0; t < steps.size(); t += r) stream.push_back(steps[t]);
        std::vector<std::size_t> lengths;
        for (std::size_t len : batch.lengths) lengths.push_back((len + r - 1) / r);
        finals.push_back(rnns_[i].run(tape, params, stream, lengths).final_state);
      }
      out = finals.size() == 1 ? finals.front() : nn::concat_cols(finals);
      break;
    }
  }
  if (spec_.projection)
    out = nn::linear(out, tape.param(params, prefix_ + "proj_w"),
                     tape.param(params, prefix_ + "proj_b"));
  return out;
}

Array Encoder::encode(const ParamSet& params, const SeqBatch& batch) const {
  Tape tape;
  return encode(tape, params, batch).value();
}

std::vector<Array> Encoder::context_outputs(const ParamSet& params, const SeqBatch& batch) const {
  require(spec_.variant == Variant::context, "encoder: not a context-injected encoder");
  batch.validate();
  Tape tape;
  std::vector<Var> steps;
  for (const auto& s : batch.steps) steps.push_back(tape.constant(s));
  std::vector<Array> out;
  for (Var v : context_.front().run(tape, params, steps, batch.lengths).outputs)
    out.push_back(v.value());
  return out;
}

}  // namespace seqtag::recur
