#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "seqtag/array.hpp"

// Frame-level datasets stored as JSON lines: a manifest object on line 1,
// then one record per line.
//
//   {"manifest":{"vocabulary":V,"dim":D,"max_len":300,"records":N,"split":"train",
//                "scaling":{"mean":[...],"std":[...]}}}
//   {"id":"v0","labels":[2,7],"frames":[[...],[...]]}

namespace seqtag::data {

struct FrameRecord {
  std::string id;
  std::vector<std::size_t> labels;  // strictly increasing, non-empty
  Array frames;                     // T x D

  std::size_t length() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

/// Per-dimension standardization fitted on a training split.
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const { return mean.empty(); }
  /// Mean and population standard deviation over every frame; zero deviations become 1.
  static FeatureScaling fit(const std::vector<FrameRecord>& records);
  void apply(FrameRecord& record) const;
};

struct DatasetManifest {
  std::size_t vocabulary = 0;
  std::size_t dim = 0;
  std::size_t max_len = 300;
  std::size_t records = 0;
  std::string split = "train";
  FeatureScaling scaling;

  void validate() const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FrameRecord> records;

  std::size_t size() const { return records.size(); }
  /// Checks every record against the manifest, including the record count.
  void validate() const;
};

/// Throws ValidationError naming the record when ids are empty, labels are not
/// strictly increasing within [0, V), frames are empty or D differs, or a
/// value is not finite.
void validate_record(const FrameRecord& record, const DatasetManifest& manifest);

/// Streams records one at a time. Errors carry the file name and line number.
class RecordReader {
 public:
  explicit RecordReader(const std::filesystem::path& path);
  const DatasetManifest& manifest() const { return manifest_; }
  std::optional<FrameRecord> next();

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 1;
  std::size_t seen_ = 0;
  DatasetManifest manifest_;
};

/// Writes the manifest with `records` set to the actual count.
void write_records(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_records(const std::filesystem::path& path);

/// Applies the manifest's feature scaling to every record and clears it.
void standardize(Dataset& dataset);

struct PaddedFrames {
  Array frames;        // L x D
  std::size_t length;  // min(T, L)
  std::vector<double> mask;  // 1 for the first `length` rows
};

/// Keeps the first L frames, or appends zero rows up to L.
PaddedFrames pad_or_truncate(const FrameRecord& record, std::size_t max_len = 300);

/// Frames 0, r, 2r, ...; the result has ceil(T / r) frames.
FrameRecord subsample(const FrameRecord& record, std::size_t rate);

/// N x V multi-hot matrix.
Array label_matrix(const std::vector<FrameRecord>& records, std::size_t vocabulary);

}  // namespace seqtag::data
