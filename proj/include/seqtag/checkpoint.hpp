#pragma once

#include <cstddef>
#include <filesystem>

#include "seqtag/config.hpp"
#include "seqtag/dataio.hpp"
#include "seqtag/model.hpp"
#include "seqtag/param_set.hpp"

namespace seqtag {

/// A trained model: its run configuration, input and vocabulary sizes, and
/// every parameter (trainable or not) with its exact value.
struct Checkpoint {
  RunConfig config;
  std::size_t input_dim = 0;
  std::size_t vocabulary = 0;
  ParamSet params;

  model::Model build_model() const;
  /// Throws ValidationError when `manifest` disagrees with the checkpoint's sizes.
  void check_compatible(const data::DatasetManifest& manifest) const;
};

/// JSON with doubles printed in round-trip form, so a load reproduces the
/// saved parameters bit for bit.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws DataError on unreadable or malformed files and ValidationError when
/// the parameters do not match the model the configuration describes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seqtag
