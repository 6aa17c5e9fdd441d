// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file: one JSON document holding the run configuration, relation
// schema, vocabulary, every named parameter as {shape, data} and the lexicon
// in effect at the end of training. Doubles are written in shortest
// round-trip form, so save -> load is lossless.
#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "casaug/config.hpp"
#include "casaug/errors.hpp"
#include "casaug/model.hpp"
#include "casaug/subject_lexicon.hpp"

namespace casaug {

inline constexpr const char* kCheckpointFormat = "casaug-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json params_to_json(const NamedParams& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, t] : params) {
    j[name] = {{"shape", t.shape()},
               {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  return j;
}

/// Copies stored values into `params`; names and shapes must match exactly.
inline void params_from_json(NamedParams& params, const nlohmann::json& j) {
  if (j.size() != params.size()) {
    throw InputError("checkpoint holds " + std::to_string(j.size()) + " parameters, model has " +
                     std::to_string(params.size()));
  }
  for (auto& [name, t] : params) {
    if (!j.contains(name)) throw InputError("checkpoint lacks parameter '" + name + "'");
    const auto& entry = j.at(name);
    const auto shape = entry.at("shape").get<Shape>();
    if (shape != t.shape()) {
      throw InputError("parameter '" + name + "' has shape " + shape_string(shape) +
                       " in checkpoint, " + shape_string(t.shape()) + " in model");
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != t.size()) throw InputError("parameter '" + name + "' data length mismatch");
    std::copy(data.begin(), data.end(), t.mutable_data().begin());
  }
}

inline nlohmann::json model_to_json(const Model& model, const RunConfig& run) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(run, false)},
          {"schema", model.schema.names()},
          {"vocab", model.vocab.tokens()},
          {"params", params_to_json(model.params.named())},
          {"lexicon", lexicon_to_json(model.lexicon)}};
}

struct LoadedCheckpoint {
  Model model;
  RunConfig run;
};

inline LoadedCheckpoint model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat ||
        j.at("version").get<int>() != kCheckpointVersion) {
      throw InputError("not a version-" + std::to_string(kCheckpointVersion) + " checkpoint");
    }
    LoadedCheckpoint out;
    out.run = run_config_from_json(j.at("config"));
    Model& model = out.model;
    model.config = out.run.model;
    model.schema = RelationSchema(j.at("schema").get<std::vector<std::string>>());
    model.vocab = TokenVocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    model.params = ModelParams::init(model.config, model.vocab.size(), model.schema.size(),
                                     InitMode::Zero, 0);
    NamedParams named = model.params.named();
    params_from_json(named, j.at("params"));
    model.lexicon = lexicon_from_json(j.at("lexicon"));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
}

inline void save_checkpoint(const std::string& path, const Model& model, const RunConfig& run) {
  write_text_file(path, model_to_json(model, run).dump() + "\n");
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace casaug
