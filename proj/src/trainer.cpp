#include "seqtag/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqtag/adam.hpp"
#include "seqtag/error.hpp"
#include "seqtag/predictions.hpp"
#include "seqtag/rng.hpp"

namespace seqtag::train {

namespace {

// Independent streams for initialization, batch order and dropout.
Rng stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{seed, index};
  return Rng(seq);
}

}  // namespace

std::string format_epoch(const EpochLog& log) {
  std::string line = "epoch " + std::to_string(log.epoch) +
                     " loss " + format_double(log.train_loss) +
                     " lr " + format_double(log.learning_rate);
  if (log.val_gap) line += " val_gap " + format_double(*log.val_gap);
  if (log.val_map) line += " val_map " + format_double(*log.val_map);
  return line;
}

metrics::EvalReport evaluate(const model::Model& model, const ParamSet& params,
                             const data::Dataset& dataset, std::size_t k) {
  require(dataset.size() > 0, "evaluate: empty dataset");
  require(dataset.manifest.vocabulary == model.vocabulary(),
          "evaluate: dataset vocabulary does not match the model");
  const Array scores = model.predict(params, dataset.records);
  return metrics::evaluate(scores, data::label_matrix(dataset.records, model.vocabulary()), k);
}

ParamSet initial_params(const RunConfig& config, std::size_t input_dim, std::size_t vocabulary) {
  const model::Model model(config.resolved_model(), input_dim, vocabulary);
  ParamSet params;
  Rng rng = stream(config.seed, 0);
  model.init(params, rng);
  return params;
}

TrainResult fit(const RunConfig& config, const data::Dataset& train,
                const data::Dataset* validation, const EpochCallback& on_epoch) {
  config.validate();
  require(train.size() > 0, "fit: empty training set");
  const std::size_t d = train.manifest.dim, v = train.manifest.vocabulary;
  if (validation) {
    require(validation->size() > 0, "fit: empty validation set");
    require(validation->manifest.dim == d && validation->manifest.vocabulary == v,
            "fit: validation set dimension or vocabulary differs from the training set");
  }
  const model::Model model(config.resolved_model(), d, v);

  TrainResult result;
  result.params = initial_params(config, d, v);
  ParamSet params = result.params;

  nn::AdamState adam;
  adam.base_lr = config.learning_rate();
  adam.decay_factor = config.decay_factor();
  adam.decay_every_examples = config.decay_interval();

  Rng order_rng = stream(config.seed, 1);
  Rng dropout_rng = stream(config.seed, 2);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const data::FrameRecord*> chunk;
      for (std::size_t i = begin; i < end; ++i) chunk.push_back(&train.records[order[i]]);
      const model::Batch batch = model::make_batch(chunk, model.spec().max_len, v);

      nn::Tape tape;
      model::StepContext ctx{&dropout_rng, {}};
      const nn::Var loss = model.loss(tape, params, batch, ctx);
      const double value = loss.value()[0];
      if (!std::isfinite(value))
        throw NumericError("training loss became non-finite in epoch " + std::to_string(epoch));
      tape.backward(loss);
      nn::adam_step(params, tape.param_grads(params), adam, chunk.size());
      model.finish_step(params, ctx);
      loss_sum += value * static_cast<double>(chunk.size());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train.size());
    log.learning_rate = adam.learning_rate();
    if (validation && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const auto report = evaluate(model, params, *validation, config.topk);
      log.val_gap = report.gap;
      log.val_map = report.classes.mean;
      if (!result.best_gap || report.gap > *result.best_gap) {
        result.best_gap = report.gap;
        result.best_epoch = epoch;
        result.params = params;
      }
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (!validation && config.epochs > 0) {
    result.params = std::move(params);
    result.best_epoch = config.epochs;
  }
  return result;
}

}  // namespace seqtag::train
