#include "seqtag/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "seqtag/error.hpp"
#include "seqtag/predictions.hpp"

namespace seqtag {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_unsigned(const std::string& text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size())
    throw ValidationError("expected a non-negative integer, got '" + text + "'");
  return value;
}

double parse_real(const std::string& text) {
  try {
    const double v = parse_double(text);
    if (!std::isfinite(v)) throw DataError("");
    return v;
  } catch (const DataError&) {
    throw ValidationError("expected a finite number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError("expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_unsigned<std::size_t>(trim(item)));
  if (out.empty()) throw ValidationError("expected a comma-separated list of integers");
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const char* const (&names)[N]) {
  for (std::size_t i = 0; i < N; ++i)
    if (text == names[i]) return static_cast<E>(i);
  std::string allowed;
  for (std::size_t i = 0; i < N; ++i) allowed += (i ? ", " : "") + std::string(names[i]);
  throw ValidationError("expected one of " + allowed + ", got '" + text + "'");
}

template <typename E, std::size_t N>
std::string enum_name(E value, const char* const (&names)[N]) {
  return names[static_cast<std::size_t>(value)];
}

constexpr const char* kLosses[] = {"sigmoid", "smoothed_softmax"};
constexpr const char* kSchemes[] = {"ordered", "random"};
constexpr const char* kVariants[] = {"stacked", "context", "hierarchical", "multiscale"};
constexpr const char* kCells[] = {"gru", "lstm"};
constexpr const char* kKernels[] = {"alpha", "decoupled", "attention"};
constexpr const char* kAxes[] = {"centers", "inputs"};
constexpr const char* kNorms[] = {"none", "intra", "global", "intra_global"};
constexpr const char* kNormModes[] = {"batch", "affine"};
constexpr const char* kPresets[] = {"desk", "full"};

std::string real(double v) { return format_double(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const RunConfig&)> get;
};

#define SIZE_KEY(NAME, FIELD)                                                       \
  Key {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_unsigned<std::size_t>(v); }, \
        [](const RunConfig& c) -> std::optional<std::string> { return std::to_string(c.FIELD); } \
  }
#define REAL_KEY(NAME, FIELD)                                                       \
  Key {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_real(v); },       \
        [](const RunConfig& c) -> std::optional<std::string> { return real(c.FIELD); } \
  }
#define BOOL_KEY(NAME, FIELD)                                                       \
  Key {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(v); },       \
        [](const RunConfig& c) -> std::optional<std::string> { return flag(c.FIELD); } \
  }
#define ENUM_KEY(NAME, FIELD, TYPE, TABLE)                                                 \
  Key {                                                                                    \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_enum<TYPE>(v, TABLE); }, \
        [](const RunConfig& c) -> std::optional<std::string> { return enum_name(c.FIELD, TABLE); } \
  }

// Application order matters: resnet.preset precedes the fields it sets.
const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"model",
          [](RunConfig& c, const std::string& v) { c.model.kind = model::parse_model_kind(v); },
          [](const RunConfig& c) -> std::optional<std::string> {
            return model::to_string(c.model.kind);
          }},
      SIZE_KEY("mixtures", model.mixtures),
      ENUM_KEY("loss", model.loss, model::LossKind, kLosses),
      SIZE_KEY("max_len", model.max_len),
      SIZE_KEY("pmoe.width", model.partition_width),
      ENUM_KEY("pmoe.scheme", model.partition_scheme, moe::PartitionScheme, kSchemes),
      Key{"pmoe.seed",
          [](RunConfig& c, const std::string& v) {
            c.model.partition_seed = parse_unsigned<std::uint64_t>(v);
          },
          [](const RunConfig& c) -> std::optional<std::string> {
            return std::to_string(c.model.partition_seed);
          }},
      ENUM_KEY("encoder.variant", model.encoder.variant, recur::Variant, kVariants),
      ENUM_KEY("encoder.cell", model.encoder.cell, recur::CellKind, kCells),
      SIZE_KEY("encoder.layers", model.encoder.layers),
      BOOL_KEY("encoder.bidirectional", model.encoder.bidirectional),
      SIZE_KEY("encoder.state_dim", model.encoder.state_dim),
      SIZE_KEY("encoder.window", model.encoder.window),
      SIZE_KEY("encoder.segment_state_dim", model.encoder.segment_state_dim),
      SIZE_KEY("encoder.hidden_mixtures", model.encoder.hidden_mixtures),
      Key{"encoder.dropout_keep",
          [](RunConfig& c, const std::string& v) { c.dropout_keep = parse_real(v); },
          [](const RunConfig& c) -> std::optional<std::string> {
            return real(c.resolved_model().encoder.dropout_keep);
          }},
      Key{"encoder.rates",
          [](RunConfig& c, const std::string& v) { c.model.encoder.rates = parse_sizes(v); },
          [](const RunConfig& c) -> std::optional<std::string> {
            return join_sizes(c.model.encoder.rates);
          }},
      BOOL_KEY("encoder.projection", model.encoder.projection),
      SIZE_KEY("encoder.projection_dim", model.encoder.projection_dim),
      SIZE_KEY("attention.proj", model.attention_proj),
      SIZE_KEY("attention.hops", model.attention_hops),
      SIZE_KEY("vlad.centers", model.vlad.centers),
      ENUM_KEY("vlad.kernel", model.vlad.kernel, agg::KernelKind, kKernels),
      ENUM_KEY("vlad.axis", model.vlad.axis, agg::SoftmaxAxis, kAxes),
      REAL_KEY("vlad.alpha", model.vlad.alpha),
      SIZE_KEY("vlad.proj", model.vlad.proj_size),
      REAL_KEY("vlad.cluster_weight", model.vlad.cluster_weight),
      ENUM_KEY("vlad.norm", model.vlad.norm, agg::DescriptorNorm, kNorms),
      REAL_KEY("vlad.center_scale", model.vlad.center_scale),
      Key{"resnet.preset",
          [](RunConfig& c, const std::string& v) {
            c.model.resnet = parse_enum<int>(v, kPresets) == 0 ? conv::ResNet1dSpec::desk()
                                                               : conv::ResNet1dSpec::full();
          },
          [](const RunConfig&) -> std::optional<std::string> { return std::nullopt; }},
      Key{"resnet.channels",
          [](RunConfig& c, const std::string& v) { c.model.resnet.channels = parse_sizes(v); },
          [](const RunConfig& c) -> std::optional<std::string> {
            return join_sizes(c.model.resnet.channels);
          }},
      Key{"resnet.blocks",
          [](RunConfig& c, const std::string& v) { c.model.resnet.blocks = parse_sizes(v); },
          [](const RunConfig& c) -> std::optional<std::string> {
            return join_sizes(c.model.resnet.blocks);
          }},
      SIZE_KEY("resnet.stem_kernel", model.resnet.stem_kernel),
      SIZE_KEY("resnet.stem_stride", model.resnet.stem_stride),
      BOOL_KEY("resnet.stem_pool", model.resnet.stem_pool),
      SIZE_KEY("resnet.mid_kernel", model.resnet.mid_kernel),
      BOOL_KEY("resnet.downsample", model.resnet.downsample),
      ENUM_KEY("resnet.norm", model.resnet.norm, conv::NormMode, kNormModes),
      REAL_KEY("resnet.bn_eps", model.resnet.bn_eps),
      REAL_KEY("resnet.bn_momentum", model.resnet.bn_momentum),
      Key{"lr", [](RunConfig& c, const std::string& v) { c.lr = parse_real(v); },
          [](const RunConfig& c) -> std::optional<std::string> { return real(c.learning_rate()); }},
      Key{"lr_decay", [](RunConfig& c, const std::string& v) { c.lr_decay = parse_real(v); },
          [](const RunConfig& c) -> std::optional<std::string> { return real(c.decay_factor()); }},
      Key{"decay_every",
          [](RunConfig& c, const std::string& v) {
            c.decay_every = parse_unsigned<std::uint64_t>(v);
          },
          [](const RunConfig& c) -> std::optional<std::string> {
            return std::to_string(c.decay_interval());
          }},
      SIZE_KEY("batch_size", batch_size),
      SIZE_KEY("epochs", epochs),
      Key{"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_unsigned<std::uint64_t>(v); },
          [](const RunConfig& c) -> std::optional<std::string> { return std::to_string(c.seed); }},
      SIZE_KEY("eval_every", eval_every),
      SIZE_KEY("topk", topk),
      Key{"data.train", [](RunConfig& c, const std::string& v) { c.train_path = v; },
          [](const RunConfig& c) -> std::optional<std::string> { return c.train_path; }},
      Key{"data.val", [](RunConfig& c, const std::string& v) { c.val_path = v; },
          [](const RunConfig& c) -> std::optional<std::string> { return c.val_path; }},
  };
  return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef BOOL_KEY
#undef ENUM_KEY

struct Assignment {
  std::string value;
  std::string origin;
};

void fail_if_any(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::string message = "invalid configuration (" + std::to_string(errors.size()) +
                        (errors.size() == 1 ? " problem):" : " problems):");
  for (const auto& e : errors) message += "\n  " + e;
  throw ValidationError(message);
}

RunConfig apply_assignments(const std::map<std::string, Assignment>& assigned, std::vector<std::string>& errors) {
  RunConfig config;
  for (const auto& [name, a] : assigned) {
    bool known = false;
    for (const Key& k : keys()) known |= k.name == name;
    if (!known) errors.push_back(a.origin + ": unknown key '" + name + "'");
  }
  for (const Key& k : keys()) {
    const auto it = assigned.find(k.name);
    if (it == assigned.end()) continue;
    try {
      k.set(config, it->second.value);
    } catch (const ValidationError& e) {
      errors.push_back(it->second.origin + ": " + k.name + ": " + e.what());
    }
  }
  return config;
}

std::vector<std::string> validation_errors(const RunConfig& c) {
  std::vector<std::string> errors;
  c.resolved_model().collect_errors(errors);
  if (!(c.learning_rate() > 0.0)) errors.emplace_back("lr must be positive");
  const double decay = c.decay_factor();
  if (!(decay > 0.0 && decay <= 1.0)) errors.emplace_back("lr_decay must lie in (0, 1]");
  if (c.decay_interval() < 1) errors.emplace_back("decay_every must be at least 1");
  if (c.dropout_keep && !(*c.dropout_keep > 0.0 && *c.dropout_keep <= 1.0))
    errors.emplace_back("encoder.dropout_keep must lie in (0, 1]");
  if (c.batch_size < 1) errors.emplace_back("batch_size must be at least 1");
  if (c.eval_every < 1) errors.emplace_back("eval_every must be at least 1");
  if (c.topk < 1) errors.emplace_back("topk must be at least 1");
  return errors;
}

}  // namespace

double RunConfig::learning_rate() const {
  if (lr) return *lr;
  if (model.kind == model::ModelKind::rnn) return 5e-4;
  if (model.kind == model::ModelKind::resnet1d) return 0.1;
  return 0.01;
}

double RunConfig::decay_factor() const {
  if (lr_decay) return *lr_decay;
  return model.kind == model::ModelKind::resnet1d ? 0.1 : 0.9;
}

std::uint64_t RunConfig::decay_interval() const {
  if (decay_every) return *decay_every;
  return model.kind == model::ModelKind::resnet1d ? 10'000'000 : 4'000'000;
}

model::ModelSpec RunConfig::resolved_model() const {
  model::ModelSpec spec = model;
  spec.encoder.dropout_keep =
      dropout_keep.value_or(spec.encoder.variant == recur::Variant::hierarchical ? 0.5 : 1.0);
  return spec;
}

void RunConfig::validate() const { fail_if_any(validation_errors(*this)); }

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Key& k : keys())
    if (auto v = k.get(*this)) out.emplace_back(k.name, *v);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

RunConfig RunConfig::parse(std::string_view text, const std::vector<std::string>& overrides) {
  std::map<std::string, Assignment> assigned;
  std::vector<std::string> errors;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string origin = "line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(origin + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (assigned.count(key)) {
      errors.push_back(origin + ": duplicate key '" + key + "'");
      continue;
    }
    assigned[key] = {trim(line.substr(eq + 1)), origin};
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      errors.push_back("override '" + o + "': expected key=value");
      continue;
    }
    assigned[trim(o.substr(0, eq))] = {trim(o.substr(eq + 1)), "override '" + o + "'"};
  }
  RunConfig config = apply_assignments(assigned, errors);
  const auto more = validation_errors(config);
  errors.insert(errors.end(), more.begin(), more.end());
  fail_if_any(errors);
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), overrides);
}

RunConfig RunConfig::from_entries(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::map<std::string, Assignment> assigned;
  for (const auto& [k, v] : entries) assigned[k] = {v, "entry"};
  std::vector<std::string> errors;
  RunConfig config = apply_assignments(assigned, errors);
  const auto more = validation_errors(config);
  errors.insert(errors.end(), more.begin(), more.end());
  fail_if_any(errors);
  return config;
}

}  // namespace seqtag
