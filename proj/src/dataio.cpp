#include "seqtag/dataio.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "seqtag/error.hpp"

namespace seqtag::data {

using json = nlohmann::json;

namespace {

json manifest_to_json(const DatasetManifest& m, std::size_t records) {
  json scaling = json::object();
  if (!m.scaling.empty()) scaling = {{"mean", m.scaling.mean}, {"std", m.scaling.stddev}};
  return {{"manifest",
           {{"vocabulary", m.vocabulary},
            {"dim", m.dim},
            {"max_len", m.max_len},
            {"records", records},
            {"split", m.split},
            {"scaling", scaling}}}};
}

DatasetManifest manifest_from_json(const json& j) {
  if (!j.is_object() || !j.contains("manifest"))
    throw DataError("expected a manifest object on line 1");
  const json& m = j.at("manifest");
  DatasetManifest out;
  out.vocabulary = m.at("vocabulary").get<std::size_t>();
  out.dim = m.at("dim").get<std::size_t>();
  out.max_len = m.at("max_len").get<std::size_t>();
  out.records = m.at("records").get<std::size_t>();
  out.split = m.at("split").get<std::string>();
  if (m.contains("scaling") && m.at("scaling").contains("mean")) {
    out.scaling.mean = m.at("scaling").at("mean").get<std::vector<double>>();
    out.scaling.stddev = m.at("scaling").at("std").get<std::vector<double>>();
  }
  return out;
}

json record_to_json(const FrameRecord& r) {
  json frames = json::array();
  for (std::size_t t = 0; t < r.length(); ++t) {
    const auto row = r.frames.row(t);
    frames.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"id", r.id}, {"labels", r.labels}, {"frames", std::move(frames)}};
}

FrameRecord record_from_json(const json& j) {
  FrameRecord r;
  r.id = j.at("id").get<std::string>();
  r.labels = j.at("labels").get<std::vector<std::size_t>>();
  const json& frames = j.at("frames");
  if (!frames.is_array() || frames.empty()) throw DataError("record has no frames");
  const std::size_t t = frames.size();
  const std::size_t d = frames.front().size();
  if (d == 0) throw DataError("record has empty frames");
  std::vector<double> values;
  values.reserve(t * d);
  for (const json& row : frames) {
    if (!row.is_array() || row.size() != d) throw DataError("frames have inconsistent widths");
    for (const json& v : row) values.push_back(v.get<double>());
  }
  r.frames = Array({t, d}, std::move(values));
  return r;
}

}  // namespace

FeatureScaling FeatureScaling::fit(const std::vector<FrameRecord>& records) {
  require(!records.empty(), "feature scaling: no records");
  const std::size_t d = records.front().dim();
  std::vector<double> sum(d, 0.0);
  std::size_t count = 0;
  for (const auto& r : records) {
    require(r.dim() == d, "feature scaling: records differ in dimension");
    for (std::size_t t = 0; t < r.length(); ++t)
      for (std::size_t k = 0; k < d; ++k) sum[k] += r.frames(t, k);
    count += r.length();
  }
  FeatureScaling out;
  out.mean.resize(d);
  out.stddev.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) out.mean[k] = sum[k] / static_cast<double>(count);
  for (const auto& r : records)
    for (std::size_t t = 0; t < r.length(); ++t)
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = r.frames(t, k) - out.mean[k];
        out.stddev[k] += diff * diff;
      }
  for (auto& s : out.stddev) {
    s = std::sqrt(s / static_cast<double>(count));
    if (s == 0.0) s = 1.0;
  }
  return out;
}

void FeatureScaling::apply(FrameRecord& record) const {
  require(record.dim() == mean.size(), "feature scaling: dimension mismatch");
  for (std::size_t t = 0; t < record.length(); ++t)
    for (std::size_t k = 0; k < mean.size(); ++k)
      record.frames(t, k) = (record.frames(t, k) - mean[k]) / stddev[k];
}

void DatasetManifest::validate() const {
  require(vocabulary >= 1, "manifest: vocabulary must be positive");
  require(dim >= 1, "manifest: dim must be positive");
  require(max_len >= 1, "manifest: max_len must be positive");
  if (!scaling.empty()) {
    require(scaling.mean.size() == dim && scaling.stddev.size() == dim,
            "manifest: scaling vectors must have one entry per dimension");
    for (double s : scaling.stddev)
      require(std::isfinite(s) && s > 0.0, "manifest: scaling deviations must be positive");
  }
}

void validate_record(const FrameRecord& r, const DatasetManifest& m) {
  const std::string who = "record '" + r.id + "': ";
  require(!r.id.empty(), "record with empty id");
  require(r.id.find_first_of(",\n\r") == std::string::npos,
          who + "id must not contain commas or line breaks");
  require(!r.labels.empty(), who + "no labels");
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    require(r.labels[i] < m.vocabulary, who + "label " + std::to_string(r.labels[i]) +
                                            " outside [0, " + std::to_string(m.vocabulary) + ")");
    require(i == 0 || r.labels[i] > r.labels[i - 1], who + "labels must be strictly increasing");
  }
  require(!r.frames.empty() && r.frames.rank() == 2, who + "frames must be a non-empty T x D matrix");
  require(r.dim() == m.dim, who + "frame width " + std::to_string(r.dim()) +
                                " does not match manifest dim " + std::to_string(m.dim));
  require(r.frames.all_finite(), who + "non-finite frame value");
}

void Dataset::validate() const {
  manifest.validate();
  require(manifest.records == records.size(),
          "manifest lists " + std::to_string(manifest.records) + " records but dataset has " +
              std::to_string(records.size()));
  for (const auto& r : records) validate_record(r, manifest);
}

RecordReader::RecordReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in_, line)) throw DataError(path.string() + ": empty file, expected a manifest");
  try {
    manifest_ = manifest_from_json(json::parse(line));
    manifest_.validate();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": line 1: " + e.what());
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": line 1: " + e.what());
  }
}

std::optional<FrameRecord> RecordReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.empty()) continue;
    const auto where = path_.string() + ": line " + std::to_string(line_) + ": ";
    FrameRecord record;
    try {
      record = record_from_json(json::parse(line));
      validate_record(record, manifest_);
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const std::exception& e) {
      throw DataError(where + e.what());
    }
    ++seen_;
    return record;
  }
  if (seen_ != manifest_.records)
    throw DataError(path_.string() + ": manifest lists " + std::to_string(manifest_.records) +
                    " records but the file holds " + std::to_string(seen_));
  return std::nullopt;
}

void write_records(const std::filesystem::path& path, const Dataset& dataset) {
  dataset.manifest.validate();
  for (const auto& r : dataset.records) validate_record(r, dataset.manifest);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(dataset.manifest, dataset.records.size()).dump() << '\n';
  for (const auto& r : dataset.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset read_records(const std::filesystem::path& path) {
  RecordReader reader(path);
  Dataset out;
  out.manifest = reader.manifest();
  while (auto record = reader.next()) out.records.push_back(std::move(*record));
  return out;
}

void standardize(Dataset& dataset) {
  if (dataset.manifest.scaling.empty()) return;
  for (auto& r : dataset.records) dataset.manifest.scaling.apply(r);
  dataset.manifest.scaling = {};
}

PaddedFrames pad_or_truncate(const FrameRecord& record, std::size_t max_len) {
  require(max_len >= 1, "pad_or_truncate: length must be at least 1");
  const std::size_t d = record.dim();
  const std::size_t keep = std::min(record.length(), max_len);
  PaddedFrames out{Array::matrix(max_len, d), keep, std::vector<double>(max_len, 0.0)};
  std::copy_n(record.frames.values().begin(), keep * d, out.frames.values().begin());
  std::fill_n(out.mask.begin(), keep, 1.0);
  return out;
}

FrameRecord subsample(const FrameRecord& record, std::size_t rate) {
  require(rate >= 1, "subsample: rate must be at least 1");
  const std::size_t d = record.dim();
  const std::size_t t = (record.length() + rate - 1) / rate;
  FrameRecord out{record.id, record.labels, Array::matrix(t, d)};
  for (std::size_t i = 0; i < t; ++i) {
    const auto src = record.frames.row(i * rate);
    std::copy(src.begin(), src.end(), out.frames.row(i).begin());
  }
  return out;
}

Array label_matrix(const std::vector<FrameRecord>& records, std::size_t vocabulary) {
  require(!records.empty(), "label_matrix: no records");
  Array out = Array::matrix(records.size(), vocabulary);
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t c : records[i].labels) {
      require(c < vocabulary, "label_matrix: label outside vocabulary");
      out(i, c) = 1.0;
    }
  return out;
}

}  // namespace seqtag::data
