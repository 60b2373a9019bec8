#include "seqtag/model.hpp"

#include <algorithm>

#include "seqtag/error.hpp"
#include "seqtag/loss.hpp"
#include "seqtag/ops.hpp"

namespace seqtag::model {

namespace {

constexpr const char* kKindNames[] = {"logistic", "moe",       "pmoe",    "rnn",
                                      "attention", "vlad", "resnet1d"};

bool uses_moe_head(ModelKind kind) {
  return kind == ModelKind::moe || kind == ModelKind::rnn || kind == ModelKind::attention ||
         kind == ModelKind::vlad;
}

template <typename F>
void check(std::vector<std::string>& errors, F&& validate) {
  try {
    validate();
  } catch (const ValidationError& e) {
    errors.emplace_back(e.what());
  }
}

}  // namespace

std::string to_string(ModelKind kind) { return kKindNames[static_cast<int>(kind)]; }

ModelKind parse_model_kind(const std::string& text) {
  for (int i = 0; i < 7; ++i)
    if (text == kKindNames[i]) return static_cast<ModelKind>(i);
  throw ValidationError("unknown model '" + text +
                        "' (expected logistic, moe, pmoe, rnn, attention, vlad or resnet1d)");
}

void ModelSpec::collect_errors(std::vector<std::string>& errors) const {
  if (mixtures < 1) errors.emplace_back("mixtures must be at least 1");
  if (max_len < 1) errors.emplace_back("max_len must be at least 1");
  if (kind == ModelKind::pmoe && partition_width < 1)
    errors.emplace_back("pmoe.width must be at least 1");
  if (kind == ModelKind::rnn) check(errors, [&] { encoder.validate(); });
  if (kind == ModelKind::attention && (attention_proj < 1 || attention_hops < 1))
    errors.emplace_back("attention.proj and attention.hops must be at least 1");
  if (kind == ModelKind::vlad) check(errors, [&] { vlad.validate(); });
  if (kind == ModelKind::resnet1d) check(errors, [&] { resnet.validate(); });
  if (loss == LossKind::smoothed_softmax && kind != ModelKind::logistic &&
      kind != ModelKind::resnet1d)
    errors.emplace_back("loss=smoothed_softmax needs a logit head (model=logistic or resnet1d)");
}

Batch make_batch(const std::vector<const data::FrameRecord*>& records, std::size_t max_len,
                 std::size_t vocabulary) {
  require(!records.empty(), "make_batch: no records");
  const std::size_t d = records.front()->dim();
  std::vector<Array> frames;
  frames.reserve(records.size());
  Batch out;
  out.mean_frames = Array::matrix(records.size(), d);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const data::FrameRecord& r = *records[i];
    require(r.dim() == d, "make_batch: records differ in dimension");
    const std::size_t keep = std::min(r.length(), max_len);
    frames.push_back(keep == r.length() ? r.frames
                                        : data::pad_or_truncate(r, max_len).frames);
    for (std::size_t t = 0; t < keep; ++t)
      for (std::size_t k = 0; k < d; ++k) out.mean_frames(i, k) += r.frames(t, k);
    for (std::size_t k = 0; k < d; ++k) out.mean_frames(i, k) /= static_cast<double>(keep);
  }
  out.sequences = recur::SeqBatch::from_sequences(frames);
  if (vocabulary > 0) {
    out.labels = Array::matrix(records.size(), vocabulary);
    for (std::size_t i = 0; i < records.size(); ++i)
      for (std::size_t c : records[i]->labels) {
        require(c < vocabulary, "make_batch: label outside vocabulary");
        out.labels(i, c) = 1.0;
      }
  }
  return out;
}

Model::Model(ModelSpec spec, std::size_t input_dim, std::size_t vocabulary)
    : spec_(std::move(spec)), input_dim_(input_dim), vocabulary_(vocabulary) {
  std::vector<std::string> errors;
  spec_.collect_errors(errors);
  if (input_dim_ < 1) errors.emplace_back("input dimension must be at least 1");
  if (vocabulary_ < 1) errors.emplace_back("vocabulary must be at least 1");
  if (!errors.empty()) {
    std::string message = "invalid model spec:";
    for (const auto& e : errors) message += "\n  " + e;
    throw ValidationError(message);
  }
  std::size_t head_input = input_dim_;
  switch (spec_.kind) {
    case ModelKind::rnn:
      encoder_.emplace_back("enc.", spec_.encoder, input_dim_);
      head_input = encoder_.front().output_dim();
      break;
    case ModelKind::attention:
      attention_.emplace_back("attn.", input_dim_, spec_.attention_proj, spec_.attention_hops);
      head_input = attention_.front().output_dim();
      break;
    case ModelKind::vlad:
      vlad_.emplace_back("vlad.", input_dim_, spec_.vlad);
      head_input = vlad_.front().output_dim();
      break;
    case ModelKind::pmoe:
      parallel_head_.emplace_back(
          "pmoe.", input_dim_,
          moe::partition_vocabulary(vocabulary_, spec_.partition_scheme, spec_.partition_width,
                                    spec_.partition_seed),
          spec_.mixtures);
      break;
    case ModelKind::resnet1d:
      resnet_.emplace_back("resnet.", spec_.resnet, input_dim_, vocabulary_);
      break;
    case ModelKind::logistic:
    case ModelKind::moe:
      break;
  }
  if (uses_moe_head(spec_.kind)) head_.emplace_back("head.", head_input, vocabulary_, spec_.mixtures);
}

void Model::init(ParamSet& params, Rng& rng) const {
  if (spec_.kind == ModelKind::logistic) {
    params.add("logit_w", glorot(input_dim_, vocabulary_, rng));
    params.add("logit_b", Array::matrix(1, vocabulary_));
  }
  for (const auto& e : encoder_) e.init(params, rng);
  for (const auto& a : attention_) a.init(params, rng);
  for (const auto& v : vlad_) v.init(params, rng);
  for (const auto& h : parallel_head_) h.init(params, rng);
  for (const auto& r : resnet_) r.init(params, rng);
  for (const auto& h : head_) h.init(params, rng);
}

nn::Var Model::resnet_input(nn::Tape& tape, const Batch& batch) const {
  const std::size_t n = batch.sequences.batch_size(), l = spec_.max_len, d = input_dim_;
  Array x = Array::matrix(n * l, d);
  for (std::size_t t = 0; t < std::min(l, batch.sequences.max_length()); ++t)
    for (std::size_t i = 0; i < n; ++i) {
      if (t >= batch.sequences.lengths[i]) continue;
      const auto src = batch.sequences.steps[t].row(i);
      std::copy(src.begin(), src.end(), x.row(i * l + t).begin());
    }
  return tape.constant(std::move(x));
}

nn::Var Model::features(nn::Tape& tape, const ParamSet& params, const Batch& batch,
                        bool training, StepContext* ctx, nn::Var* aux_loss) const {
  switch (spec_.kind) {
    case ModelKind::rnn: {
      recur::EncodeOptions options{training, ctx ? ctx->rng : nullptr};
      return encoder_.front().encode(tape, params, batch.sequences, options);
    }
    case ModelKind::attention:
    case ModelKind::vlad: {
      std::vector<nn::Var> rows, losses;
      for (std::size_t i = 0; i < batch.sequences.batch_size(); ++i) {
        const std::size_t len = batch.sequences.lengths[i];
        Array x = Array::matrix(len, input_dim_);
        for (std::size_t t = 0; t < len; ++t) {
          const auto src = batch.sequences.steps[t].row(i);
          std::copy(src.begin(), src.end(), x.row(t).begin());
        }
        const nn::Var xv = tape.constant(std::move(x));
        if (spec_.kind == ModelKind::attention) {
          rows.push_back(attention_.front().forward(tape, params, xv));
        } else {
          auto out = vlad_.front().forward(tape, params, xv);
          rows.push_back(out.descriptor);
          losses.push_back(out.cluster_loss);
        }
      }
      if (aux_loss && !losses.empty() && spec_.vlad.cluster_weight > 0.0)
        *aux_loss = nn::scale(nn::mean(nn::concat_rows(losses)), spec_.vlad.cluster_weight);
      return nn::concat_rows(rows);
    }
    default:
      return tape.constant(batch.mean_frames);
  }
}

nn::Var Model::loss(nn::Tape& tape, const ParamSet& params, const Batch& batch,
                    StepContext& ctx) const {
  require(!batch.labels.empty() && batch.labels.cols() == vocabulary_,
          "model loss: labels must be N x V");
  require(batch.mean_frames.cols() == input_dim_, "model loss: frame dimension mismatch");
  if (spec_.kind == ModelKind::resnet1d) {
    conv::ForwardContext fc{true, &ctx.norm_stats};
    const nn::Var logits = resnet_.front().logits(tape, params, resnet_input(tape, batch),
                                                  batch.sequences.batch_size(), spec_.max_len, fc);
    return spec_.loss == LossKind::sigmoid ? nn::sigmoid_cross_entropy(logits, batch.labels)
                                           : nn::smoothed_softmax_loss(logits, batch.labels);
  }
  nn::Var aux;
  const nn::Var x = features(tape, params, batch, true, &ctx, &aux);
  nn::Var total;
  if (spec_.kind == ModelKind::logistic) {
    const nn::Var logits =
        nn::linear(x, tape.param(params, "logit_w"), tape.param(params, "logit_b"));
    total = spec_.loss == LossKind::sigmoid ? nn::sigmoid_cross_entropy(logits, batch.labels)
                                            : nn::smoothed_softmax_loss(logits, batch.labels);
  } else if (spec_.kind == ModelKind::pmoe) {
    total = parallel_head_.front().loss(tape, params, x, batch.labels);
  } else {
    total = head_.front().loss(tape, params, x, batch.labels);
  }
  return aux.valid() ? nn::add(total, aux) : total;
}

void Model::finish_step(ParamSet& params, const StepContext& ctx) const {
  if (!resnet_.empty() && !ctx.norm_stats.empty())
    resnet_.front().update_running_stats(params, ctx.norm_stats);
}

Array Model::predict(const ParamSet& params, const Batch& batch) const {
  require(batch.mean_frames.cols() == input_dim_, "predict: frame dimension mismatch");
  nn::Tape tape;
  if (spec_.kind == ModelKind::resnet1d) {
    const nn::Var logits = resnet_.front().logits(tape, params, resnet_input(tape, batch),
                                                  batch.sequences.batch_size(), spec_.max_len);
    return nn::sigmoid(logits.value());
  }
  const nn::Var x = features(tape, params, batch, false, nullptr, nullptr);
  if (spec_.kind == ModelKind::logistic)
    return nn::sigmoid(
        nn::linear(x, tape.param(params, "logit_w"), tape.param(params, "logit_b")).value());
  if (spec_.kind == ModelKind::pmoe)
    return parallel_head_.front().probabilities(tape, params, x).value();
  return head_.front().probabilities(tape, params, x).value();
}

Array Model::predict(const ParamSet& params, const std::vector<data::FrameRecord>& records,
                     std::size_t batch_size) const {
  require(!records.empty(), "predict: no records");
  require(batch_size >= 1, "predict: batch size must be at least 1");
  Array out = Array::matrix(records.size(), vocabulary_);
  for (std::size_t begin = 0; begin < records.size(); begin += batch_size) {
    const std::size_t end = std::min(records.size(), begin + batch_size);
    std::vector<const data::FrameRecord*> chunk;
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(&records[i]);
    const Array scores = predict(params, make_batch(chunk, spec_.max_len, 0));
    std::copy(scores.values().begin(), scores.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(begin * vocabulary_));
  }
  return out;
}

}  // namespace seqtag::model
