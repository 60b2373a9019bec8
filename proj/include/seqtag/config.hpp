#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqtag/model.hpp"

// Run configuration: a flat `key = value` text file plus `key=value`
// overrides. Blank lines and lines starting with '#' are ignored. Unknown
// keys and malformed values are errors, and every problem is reported at once.

namespace seqtag {

struct RunConfig {
  model::ModelSpec model;

  /// Unset values resolve to per-model defaults: lr 0.01 (5e-4 for rnn, 0.1
  /// for resnet1d), decay 0.9 every 4,000,000 examples (0.1 every 10,000,000
  /// for resnet1d), and dropout keep 0.5 for the hierarchical encoder.
  std::optional<double> lr;
  std::optional<double> lr_decay;
  std::optional<std::uint64_t> decay_every;
  std::optional<double> dropout_keep;

  std::size_t batch_size = 128;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;  // epochs between validation passes
  std::size_t topk = 20;
  std::string train_path;
  std::string val_path;

  double learning_rate() const;
  double decay_factor() const;
  std::uint64_t decay_interval() const;
  /// The model spec with defaults applied.
  model::ModelSpec resolved_model() const;

  /// Throws ValidationError listing every problem.
  void validate() const;

  /// Every key with its resolved value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;

  static RunConfig parse(std::string_view text, const std::vector<std::string>& overrides = {});
  static RunConfig load(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides = {});
  static RunConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
};

}  // namespace seqtag
