#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqtag/config.hpp"
#include "seqtag/dataio.hpp"
#include "seqtag/metrics.hpp"
#include "seqtag/model.hpp"
#include "seqtag/param_set.hpp"

namespace seqtag::train {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // example-weighted mean over the epoch
  double learning_rate = 0.0;  // at the end of the epoch
  std::optional<double> val_gap;
  std::optional<double> val_map;
};

/// One line per epoch with every number printed in shortest round-trip form.
std::string format_epoch(const EpochLog& log);

struct TrainResult {
  ParamSet params;
  std::vector<EpochLog> log;
  /// Epoch whose parameters were kept, 0 for the initialization.
  std::size_t best_epoch = 0;
  std::optional<double> best_gap;
};

/// The parameters `fit` starts from for this configuration and data shape.
ParamSet initial_params(const RunConfig& config, std::size_t input_dim, std::size_t vocabulary);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains `config.resolved_model()` on `train` with ADAM and example-based
/// learning-rate decay. Batches are drawn from a seeded shuffle per epoch.
/// With a validation set the returned parameters are those with the best
/// validation GAP; without one they are the final parameters.
TrainResult fit(const RunConfig& config, const data::Dataset& train,
                const data::Dataset* validation = nullptr, const EpochCallback& on_epoch = {});

/// Scores `dataset` with `params` and returns GAP at `k` and mAP.
metrics::EvalReport evaluate(const model::Model& model, const ParamSet& params,
                             const data::Dataset& dataset, std::size_t k = 20);

}  // namespace seqtag::train
