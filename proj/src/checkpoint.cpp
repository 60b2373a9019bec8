#include "seqtag/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "seqtag/error.hpp"
#include "seqtag/rng.hpp"

namespace seqtag {

namespace {

constexpr const char* kFormat = "seqtag-checkpoint";
constexpr int kVersion = 1;

}  // namespace

model::Model Checkpoint::build_model() const {
  return model::Model(config.resolved_model(), input_dim, vocabulary);
}

void Checkpoint::check_compatible(const data::DatasetManifest& manifest) const {
  if (manifest.dim != input_dim || manifest.vocabulary != vocabulary)
    throw ValidationError("data has dim " + std::to_string(manifest.dim) + " and vocabulary " +
                          std::to_string(manifest.vocabulary) + " but the checkpoint expects dim " +
                          std::to_string(input_dim) + " and vocabulary " +
                          std::to_string(vocabulary));
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["input_dim"] = checkpoint.input_dim;
  j["vocabulary"] = checkpoint.vocabulary;
  nlohmann::json config = nlohmann::json::array();
  for (const auto& [k, v] : checkpoint.config.entries()) config.push_back({k, v});
  j["config"] = std::move(config);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, p] : checkpoint.params)
    params.push_back({{"name", name},
                      {"shape", p.value.shape()},
                      {"trainable", p.trainable},
                      {"data", p.value.values()}});
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Checkpoint ck;
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != kFormat || j.at("version").get<int>() != kVersion)
      throw DataError("unsupported checkpoint format");
    ck.input_dim = j.at("input_dim").get<std::size_t>();
    ck.vocabulary = j.at("vocabulary").get<std::size_t>();
    entries = j.at("config").get<std::vector<std::pair<std::string, std::string>>>();
    for (const auto& p : j.at("params")) {
      auto shape = p.at("shape").get<std::vector<std::size_t>>();
      auto data = p.at("data").get<std::vector<double>>();
      if (shape_product(shape) != data.size())
        throw DataError("parameter " + p.at("name").get<std::string>() +
                        " has the wrong number of values");
      ck.params.add(p.at("name").get<std::string>(), Array(std::move(shape), std::move(data)),
                    p.at("trainable").get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  ck.config = RunConfig::from_entries(entries);

  ParamSet expected;
  Rng rng(0);
  ck.build_model().init(expected, rng);
  for (const auto& [name, p] : expected) {
    if (!ck.params.contains(name))
      throw ValidationError("checkpoint is missing parameter " + name);
    if (!ck.params.at(name).same_shape(p.value))
      throw ValidationError("checkpoint parameter " + name + " has shape " +
                            shape_string(ck.params.at(name).shape()) + ", expected " +
                            shape_string(p.value.shape()));
  }
  if (ck.params.count() != expected.count())
    throw ValidationError("checkpoint has parameters the model does not use");
  return ck;
}

}  // namespace seqtag
