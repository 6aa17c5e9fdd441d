// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one flat JSON object whose keys double as CLI flags
// (underscores become dashes).
#pragma once

#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "casaug/corpus.hpp"
#include "casaug/errors.hpp"
#include "casaug/model.hpp"
#include "casaug/training.hpp"

namespace casaug {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SyntheticConfig synth;
  std::size_t dev_sentences = 50;
  std::size_t test_sentences = 100;

  // paths
  std::string train_path, dev_path, test_path, schema_path;
  std::string lexicon_path, checkpoint_path, report_path, metrics_path, predictions_path;
  std::string out_dir, input_path, text;
};

enum class FieldType { Int, Double, String, Bool };

struct ConfigField {
  const char* key;
  FieldType type;
  const char* help;
};

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"dim", FieldType::Int, "encoder dimension D"},
      {"context_layers", FieldType::Int, "self-attention mixing layers"},
      {"max_len", FieldType::Int, "maximum sentence length in tokens"},
      {"m", FieldType::Int, "lexicon words per relation"},
      {"n", FieldType::Int, "similar words retrieved per relation"},
      {"threshold", FieldType::Double, "tag firing threshold"},
      {"distance", FieldType::String, "euclidean | cosine"},
      {"w_norm", FieldType::String, "softmax | sigmoid"},
      {"lexicon_refresh", FieldType::String, "per-epoch | frozen"},
      {"ablation", FieldType::String, "none | disable-enhancement"},
      {"enhancement_weight", FieldType::Double, "multiplier on the enhancement vector"},
      {"epochs", FieldType::Int, "training epochs"},
      {"batch_size", FieldType::Int, "sentences per update"},
      {"learning_rate", FieldType::Double, "Adam learning rate"},
      {"beta1", FieldType::Double, "Adam beta1"},
      {"beta2", FieldType::Double, "Adam beta2"},
      {"adam_epsilon", FieldType::Double, "Adam epsilon"},
      {"seed", FieldType::Int, "seed for initialization, shuffling and synthesis"},
      {"w_subject", FieldType::Double, "subject loss weight"},
      {"w_object", FieldType::Double, "object loss weight"},
      {"w_null_object", FieldType::Double, "null-object loss weight"},
      {"w_preclass", FieldType::Double, "pre-classification loss weight"},
      {"dev_fraction", FieldType::Double, "dev split when no dev corpus is given"},
      {"min_count", FieldType::Int, "vocabulary frequency cut-off"},
      {"init", FieldType::String, "random | zero"},
      {"num_rel", FieldType::Int, "synthetic relation count"},
      {"vocab_size", FieldType::Int, "synthetic content vocabulary size"},
      {"sentences", FieldType::Int, "synthetic training sentences"},
      {"dev_sentences", FieldType::Int, "synthetic dev sentences"},
      {"test_sentences", FieldType::Int, "synthetic test sentences"},
      {"mix_normal", FieldType::Double, "fraction of Normal sentences"},
      {"mix_epo", FieldType::Double, "fraction of EPO sentences"},
      {"mix_seo", FieldType::Double, "fraction of SEO sentences"},
      {"train", FieldType::String, "training corpus (NDJSON)"},
      {"dev", FieldType::String, "dev corpus (NDJSON)"},
      {"test", FieldType::String, "test corpus (NDJSON)"},
      {"schema", FieldType::String, "relation schema (JSON list)"},
      {"lexicon", FieldType::String, "lexicon file"},
      {"checkpoint", FieldType::String, "model checkpoint"},
      {"report", FieldType::String, "evaluation report (JSON)"},
      {"metrics", FieldType::String, "per-epoch metrics log (NDJSON)"},
      {"predictions", FieldType::String, "prediction output (NDJSON)"},
      {"out_dir", FieldType::String, "output directory"},
      {"input", FieldType::String, "input text file, one sentence per line"},
      {"text", FieldType::String, "single input sentence"},
  };
  return fields;
}

namespace detail {

template <typename T>
T enum_from(const std::string& key, const std::string& v,
            std::initializer_list<std::pair<const char*, T>> table) {
  for (const auto& [name, value] : table)
    if (v == name) return value;
  std::string allowed;
  for (const auto& [name, _] : table) allowed += std::string(allowed.empty() ? "" : " | ") + name;
  throw ConfigError("invalid " + key + " '" + v + "' (expected " + allowed + ")");
}

}  // namespace detail

/// Full flat configuration. Without paths it is the provenance echo embedded
/// in artifacts, which keeps them independent of where they were written.
inline nlohmann::json to_json(const RunConfig& c, bool include_paths = true) {
  const auto& m = c.model;
  const auto& t = c.train;
  nlohmann::json j = {
      {"dim", m.encoder.dim},
      {"context_layers", m.encoder.context_layers},
      {"max_len", m.encoder.max_len},
      {"m", m.m},
      {"n", m.n},
      {"threshold", m.threshold},
      {"distance", m.distance == DistanceMetric::Euclidean ? "euclidean" : "cosine"},
      {"w_norm", m.w_norm == WeightNormalization::Softmax ? "softmax" : "sigmoid"},
      {"lexicon_refresh", m.lexicon_refresh == LexiconRefresh::PerEpoch ? "per-epoch" : "frozen"},
      {"ablation", m.disable_enhancement ? "disable-enhancement" : "none"},
      {"enhancement_weight", m.enhancement_weight},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"learning_rate", t.learning_rate},
      {"beta1", t.beta1},
      {"beta2", t.beta2},
      {"adam_epsilon", t.adam_epsilon},
      {"seed", t.seed},
      {"w_subject", t.weights.subject},
      {"w_object", t.weights.object},
      {"w_null_object", t.weights.null_object},
      {"w_preclass", t.weights.preclass},
      {"dev_fraction", t.dev_fraction},
      {"min_count", t.min_count},
      {"init", t.init == InitMode::Random ? "random" : "zero"},
      {"num_rel", c.synth.num_rel},
      {"vocab_size", c.synth.vocab_size},
      {"sentences", c.synth.sentences},
      {"dev_sentences", c.dev_sentences},
      {"test_sentences", c.test_sentences},
      {"mix_normal", c.synth.overlap_mix.normal},
      {"mix_epo", c.synth.overlap_mix.epo},
      {"mix_seo", c.synth.overlap_mix.seo},
  };
  if (!include_paths) return j;
  j.update({
      {"train", c.train_path},
      {"dev", c.dev_path},
      {"test", c.test_path},
      {"schema", c.schema_path},
      {"lexicon", c.lexicon_path},
      {"checkpoint", c.checkpoint_path},
      {"report", c.report_path},
      {"metrics", c.metrics_path},
      {"predictions", c.predictions_path},
      {"out_dir", c.out_dir},
      {"input", c.input_path},
      {"text", c.text},
  });
  return j;
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  std::set<std::string> known;
  for (const auto& f : config_fields()) known.insert(f.key);
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
  try {
    auto& m = c.model;
    auto& t = c.train;
    auto get = [&](const char* key, auto& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    auto get_enum = [&](const char* key, auto& dst, auto table) {
      if (j.contains(key)) dst = detail::enum_from(key, j.at(key).get<std::string>(), table);
    };
    get("dim", m.encoder.dim);
    get("context_layers", m.encoder.context_layers);
    get("max_len", m.encoder.max_len);
    get("m", m.m);
    get("n", m.n);
    get("threshold", m.threshold);
    get_enum("distance", m.distance,
             std::initializer_list<std::pair<const char*, DistanceMetric>>{
                 {"euclidean", DistanceMetric::Euclidean}, {"cosine", DistanceMetric::Cosine}});
    get_enum("w_norm", m.w_norm,
             std::initializer_list<std::pair<const char*, WeightNormalization>>{
                 {"softmax", WeightNormalization::Softmax},
                 {"sigmoid", WeightNormalization::Sigmoid}});
    get_enum("lexicon_refresh", m.lexicon_refresh,
             std::initializer_list<std::pair<const char*, LexiconRefresh>>{
                 {"per-epoch", LexiconRefresh::PerEpoch}, {"frozen", LexiconRefresh::Frozen}});
    get_enum("ablation", m.disable_enhancement,
             std::initializer_list<std::pair<const char*, bool>>{{"none", false},
                                                                 {"disable-enhancement", true}});
    get("enhancement_weight", m.enhancement_weight);
    get("epochs", t.epochs);
    get("batch_size", t.batch_size);
    get("learning_rate", t.learning_rate);
    get("beta1", t.beta1);
    get("beta2", t.beta2);
    get("adam_epsilon", t.adam_epsilon);
    get("seed", t.seed);
    if (j.contains("seed")) c.synth.seed = t.seed;
    get("w_subject", t.weights.subject);
    get("w_object", t.weights.object);
    get("w_null_object", t.weights.null_object);
    get("w_preclass", t.weights.preclass);
    get("dev_fraction", t.dev_fraction);
    get("min_count", t.min_count);
    get_enum("init", t.init,
             std::initializer_list<std::pair<const char*, InitMode>>{{"random", InitMode::Random},
                                                                     {"zero", InitMode::Zero}});
    get("num_rel", c.synth.num_rel);
    get("vocab_size", c.synth.vocab_size);
    get("sentences", c.synth.sentences);
    get("dev_sentences", c.dev_sentences);
    get("test_sentences", c.test_sentences);
    get("mix_normal", c.synth.overlap_mix.normal);
    get("mix_epo", c.synth.overlap_mix.epo);
    get("mix_seo", c.synth.overlap_mix.seo);
    get("train", c.train_path);
    get("dev", c.dev_path);
    get("test", c.test_path);
    get("schema", c.schema_path);
    get("lexicon", c.lexicon_path);
    get("checkpoint", c.checkpoint_path);
    get("report", c.report_path);
    get("metrics", c.metrics_path);
    get("predictions", c.predictions_path);
    get("out_dir", c.out_dir);
    get("input", c.input_path);
    get("text", c.text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  }
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  apply_json(c, j);
  return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Converts a command-line string to the JSON value type of `field`.
inline nlohmann::json parse_field_value(const ConfigField& field, const std::string& raw) {
  try {
    switch (field.type) {
      case FieldType::Int: {
        if (raw.empty() || !std::isdigit(static_cast<unsigned char>(raw.front()))) break;
        std::size_t pos = 0;
        const auto v = std::stoull(raw, &pos);
        if (pos != raw.size()) break;
        return v;
      }
      case FieldType::Double: {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) break;
        return v;
      }
      case FieldType::Bool:
        if (raw == "true" || raw == "1") return true;
        if (raw == "false" || raw == "0") return false;
        break;
      case FieldType::String:
        return raw;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("invalid value '") + raw + "' for --" + field.key);
}

}  // namespace casaug
