#include "seqtag/predictions.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seqtag/error.hpp"

namespace seqtag {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = line.find(sep, start);
    out.push_back(line.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::size_t parse_index(std::string_view text) {
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    throw DataError("expected a non-negative integer, got '" + std::string(text) + "'");
  return value;
}

}  // namespace

void PredictionSet::validate() const {
  if (ids.empty()) {
    require(scores.empty(), "prediction set: scores given without ids");
    return;
  }
  require(scores.rows() == ids.size() && scores.cols() == vocabulary,
          "prediction set: scores are " + shape_string(scores.shape()) + " for " +
              std::to_string(ids.size()) + " ids and " + std::to_string(vocabulary) +
              " classes");
  for (double s : scores.values())
    require(std::isfinite(s) && s >= 0.0 && s <= 1.0, "prediction set: score outside [0, 1]");
}

std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    throw DataError("expected a number, got '" + std::string(text) + "'");
  return value;
}

void write_prediction_csv(std::ostream& out, const PredictionSet& set, std::size_t k,
                          const Array* listed) {
  set.validate();
  require(k >= 1, "top-k must be at least 1");
  if (listed)
    require(set.size() == 0 || (listed->rows() == set.size() && listed->cols() == set.vocabulary),
            "prediction csv: listed mask must be N x V");
  out << "VideoId,LabelConfidencePairs\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.ids[i] << ',';
    std::size_t written = 0;
    for (const auto& ls : metrics::top_k(set.scores.row(i), listed ? set.vocabulary : k)) {
      if (written == k) break;
      if (listed && (*listed)(i, ls.label) <= 0.5) continue;
      if (written++) out << ' ';
      out << ls.label << ' ' << format_double(ls.score);
    }
    out << '\n';
  }
}

void write_prediction_csv(const std::filesystem::path& path, const PredictionSet& set,
                          std::size_t k, const Array* listed) {
  auto out = open_out(path);
  write_prediction_csv(out, set, k, listed);
  if (!out) throw DataError("failed writing " + path.string());
}

ParsedPredictions read_prediction_csv(std::istream& in, std::size_t vocabulary) {
  require(vocabulary >= 1, "prediction csv: vocabulary must be positive");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "VideoId,LabelConfidencePairs")
    throw DataError("prediction csv: line 1: expected header VideoId,LabelConfidencePairs");
  std::vector<std::string> ids;
  std::vector<double> scores, listed;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = strip_cr(line);
    if (text.empty()) continue;
    const auto where = "prediction csv: line " + std::to_string(line_no) + ": ";
    const std::size_t comma = text.find(',');
    if (comma == std::string_view::npos || comma == 0)
      throw DataError(where + "expected 'id,pairs'");
    ids.emplace_back(text.substr(0, comma));
    scores.resize(scores.size() + vocabulary, 0.0);
    listed.resize(listed.size() + vocabulary, 0.0);
    const std::size_t base = (ids.size() - 1) * vocabulary;
    const std::string_view pairs = text.substr(comma + 1);
    if (pairs.empty()) continue;
    const auto fields = split(pairs, ' ');
    if (fields.size() % 2 != 0) throw DataError(where + "odd number of label/score fields");
    try {
      for (std::size_t f = 0; f < fields.size(); f += 2) {
        const std::size_t label = parse_index(fields[f]);
        if (label >= vocabulary)
          throw DataError("label " + std::to_string(label) + " outside vocabulary of " +
                          std::to_string(vocabulary));
        if (listed[base + label] != 0.0)
          throw DataError("label " + std::to_string(label) + " listed twice");
        const double score = parse_double(fields[f + 1]);
        if (!(score >= 0.0 && score <= 1.0)) throw DataError("score outside [0, 1]");
        scores[base + label] = score;
        listed[base + label] = 1.0;
      }
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  ParsedPredictions out;
  out.set.ids = std::move(ids);
  out.set.vocabulary = vocabulary;
  if (!out.set.ids.empty()) {
    out.set.scores = Array({out.set.ids.size(), vocabulary}, std::move(scores));
    out.listed = Array({out.set.ids.size(), vocabulary}, std::move(listed));
  }
  return out;
}

ParsedPredictions read_prediction_csv(const std::filesystem::path& path, std::size_t vocabulary) {
  auto in = open_in(path);
  try {
    return read_prediction_csv(in, vocabulary);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_class_ap_csv(const std::filesystem::path& path, const metrics::ClassAps& aps) {
  auto out = open_out(path);
  out << "class_id,ap,positives\n";
  for (std::size_t c = 0; c < aps.ap.size(); ++c) {
    out << c << ',';
    if (aps.ap[c]) out << format_double(*aps.ap[c]);
    out << ',' << aps.positives[c] << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<double> read_class_ap_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "class_id,ap,positives")
    throw DataError(path.string() + ": line 1: expected header class_id,ap,positives");
  std::vector<double> aps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = strip_cr(line);
    if (text.empty()) continue;
    const auto where = path.string() + ": line " + std::to_string(line_no) + ": ";
    const auto fields = split(text, ',');
    if (fields.size() != 3) throw DataError(where + "expected 3 fields");
    try {
      if (parse_index(fields[0]) != aps.size()) throw DataError("class ids must be 0, 1, 2, ...");
      const double ap = fields[1].empty() ? 0.0 : parse_double(fields[1]);
      if (!(ap >= 0.0 && ap <= 1.0)) throw DataError("ap outside [0, 1]");
      parse_index(fields[2]);
      aps.push_back(ap);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return aps;
}

void write_eval_summary(const std::filesystem::path& path, const metrics::EvalReport& report,
                        std::size_t videos) {
  auto out = open_out(path);
  out << "gap=" << format_double(report.gap) << '\n'
      << "map=" << format_double(report.classes.mean) << '\n'
      << "k=" << report.k << '\n'
      << "videos=" << videos << '\n'
      << "classes=" << report.classes.ap.size() << '\n'
      << "classes_evaluated=" << report.classes.evaluated << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace seqtag
