// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `casaug` executable. Each command takes the effective
// RunConfig (defaults, then --config file, then flags) and returns an exit
// code: 0 success, 1 runtime failure, 2 configuration error.
//
// JSON artifacts carry the effective configuration inline (checkpoint
// "config", report "config_echo", lexicon "config"). Line-oriented artifacts
// (corpora, metrics, predictions) and the schema list get a
// `<path>.provenance.json` sidecar instead, so their own format stays plain.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "casaug/checkpoint.hpp"
#include "casaug/config.hpp"
#include "casaug/corpus.hpp"
#include "casaug/evaluation.hpp"
#include "casaug/model.hpp"
#include "casaug/training.hpp"
#include "casaug/verify.hpp"

namespace casaug::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"synth", "build-lexicon", "train",
                                                 "eval",  "extract",       "verify"};
  return names;
}

struct Invocation {
  std::string command;
  RunConfig run;
  /// Keys set by the config file or a flag rather than left at defaults.
  std::set<std::string> explicit_keys;

  bool given(const std::string& key) const { return explicit_keys.count(key) > 0; }
};

/// `value` if set, otherwise `name` inside out_dir (or the working directory).
inline std::string output_path(const RunConfig& run, const std::string& value, const std::string& name) {
  if (!value.empty()) return value;
  return (std::filesystem::path(run.out_dir.empty() ? "." : run.out_dir) / name).string();
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw ConfigError("cannot create directory '" + parent.string() + "': " + ec.message());
}

inline std::string require_path(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw ConfigError(std::string(command) + " needs --" + flag);
  return value;
}

inline void write_provenance(const std::string& artifact, const Invocation& inv,
                             const nlohmann::json& config) {
  const nlohmann::json j = {{"artifact", std::filesystem::path(artifact).filename().string()},
                            {"command", inv.command},
                            {"config", config},
                            {"seed", config.value("seed", inv.run.train.seed)}};
  write_text_file(artifact + ".provenance.json", j.dump(2) + "\n");
}

inline void warn_issues(const Dataset& ds, const std::string& path, std::ostream& err) {
  for (const auto& e : ds.errors) err << path << ":" << e.line << ": " << e.message << '\n';
  for (const auto& d : ds.dropped) err << path << ":" << d.line << ": dropped: " << d.message << '\n';
}

inline Dataset load_corpus(const std::string& path, const std::optional<RelationSchema>& schema,
                           std::ostream& err) {
  Dataset ds = load_dataset(path, schema);
  warn_issues(ds, path, err);
  if (ds.sentences.empty()) throw InputError("no usable sentences in '" + path + "'");
  return ds;
}

inline std::optional<RelationSchema> schema_if_given(const RunConfig& run) {
  if (run.schema_path.empty()) return std::nullopt;
  return read_schema(run.schema_path);
}

inline int cmd_synth(const Invocation& inv, std::ostream& out, std::ostream&) {
  const RunConfig& run = inv.run;
  run.synth.validate();
  const auto echo = to_json(run, false);
  SyntheticConfig cfg = run.synth;
  const struct {
    std::string path;
    std::size_t sentences;
  } splits[] = {{output_path(run, run.train_path, "train.jsonl"), run.synth.sentences},
                {output_path(run, run.dev_path, "dev.jsonl"), run.dev_sentences},
                {output_path(run, run.test_path, "test.jsonl"), run.test_sentences}};
  RelationSchema schema;
  for (std::size_t k = 0; k < 3; ++k) {
    cfg.stream = k;
    cfg.sentences = splits[k].sentences;
    const auto corpus = generate_synthetic(cfg);
    schema = corpus.schema;
    ensure_parent(splits[k].path);
    write_dataset(splits[k].path, corpus.sentences, corpus.schema);
    write_provenance(splits[k].path, inv, echo);
    out << "wrote " << corpus.sentences.size() << " sentences to " << splits[k].path << '\n';
  }
  const auto schema_path = output_path(run, run.schema_path, "schema.json");
  ensure_parent(schema_path);
  write_schema(schema_path, schema);
  write_provenance(schema_path, inv, echo);
  out << "wrote " << schema.size() << " relations to " << schema_path << '\n';
  return kExitOk;
}

inline int cmd_build_lexicon(const Invocation& inv, std::ostream& out, std::ostream& err) {
  RunConfig run = inv.run;
  const auto train_path = require_path(run.train_path, "train", "build-lexicon");
  SubjectLexicon lexicon;
  nlohmann::json echo;
  if (!run.checkpoint_path.empty()) {
    auto loaded = load_checkpoint(run.checkpoint_path);
    Model& model = loaded.model;
    if (inv.given("m")) model.config.m = run.model.m;
    const auto ds = load_corpus(train_path, model.schema, err);
    model.refresh_lexicon(ds.sentences, "checkpoint:" +
                                            std::filesystem::path(run.checkpoint_path).filename().string());
    lexicon = model.lexicon;
    loaded.run.model.m = model.config.m;
    echo = to_json(loaded.run, false);
  } else {
    run.model.validate();
    const auto ds = load_corpus(train_path, schema_if_given(run), err);
    const Model model =
        Model::create(run.model, ds.schema, ds.sentences, run.train.init, run.train.seed, run.train.min_count);
    lexicon = model.lexicon;
    echo = to_json(run, false);
  }
  auto j = lexicon_to_json(lexicon);
  j["config"] = echo;
  const auto path = output_path(run, run.lexicon_path, "lexicon.json");
  ensure_parent(path);
  write_text_file(path, j.dump() + "\n");
  std::size_t words = 0;
  for (const auto& r : lexicon.relations) words += r.size();
  out << "wrote lexicon with " << words << " words over " << lexicon.num_rel() << " relations to "
      << path << '\n';
  return kExitOk;
}

inline nlohmann::json epoch_to_json(const EpochMetrics& e) {
  return {{"epoch", e.epoch},
          {"subject_loss", e.mean_loss.subject_loss},
          {"object_loss", e.mean_loss.object_loss},
          {"null_object_loss", e.mean_loss.null_object_loss},
          {"preclass_loss", e.mean_loss.preclass_loss},
          {"total", e.mean_loss.total},
          {"dev_f1", e.dev_f1 ? nlohmann::json(*e.dev_f1) : nlohmann::json(nullptr)}};
}

inline int cmd_train(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const RunConfig& run = inv.run;
  run.model.validate();
  run.train.validate();
  const auto train_path = require_path(run.train_path, "train", "train");
  const auto ds = load_corpus(train_path, schema_if_given(run), err);

  FitOptions options;
  if (!run.dev_path.empty()) options.dev = load_corpus(run.dev_path, ds.schema, err).sentences;
  if (!run.lexicon_path.empty()) options.initial_lexicon = lexicon_from_json(read_json_file(run.lexicon_path));

  const auto metrics_path = output_path(run, run.metrics_path, "metrics.jsonl");
  const auto checkpoint_path = output_path(run, run.checkpoint_path, "checkpoint.json");
  ensure_parent(metrics_path);
  ensure_parent(checkpoint_path);
  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw ConfigError("cannot write '" + metrics_path + "'");
  options.on_epoch = [&](const EpochMetrics& e) {
    metrics << epoch_to_json(e).dump() << '\n';
    out << "epoch " << e.epoch << "  loss " << e.mean_loss.total;
    if (e.dev_f1) out << "  dev_f1 " << *e.dev_f1;
    out << '\n';
  };
  const auto result = fit(ds.sentences, ds.schema, run.model, run.train, std::move(options));
  metrics.close();
  write_provenance(metrics_path, inv, to_json(run, false));
  save_checkpoint(checkpoint_path, result.model, run);
  out << "wrote checkpoint " << checkpoint_path << '\n';
  return kExitOk;
}

inline int cmd_eval(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const RunConfig& run = inv.run;
  const auto loaded = load_checkpoint(require_path(run.checkpoint_path, "checkpoint", "eval"));
  const auto test_path = require_path(run.test_path, "test", "eval");
  const auto ds = load_corpus(test_path, loaded.model.schema, err);
  RunConfig effective = loaded.run;
  if (inv.given("threshold")) effective.model.threshold = run.model.threshold;
  effective.model.validate();

  const auto report = evaluate(loaded.model, ds.sentences, effective.model.threshold);
  const auto path = output_path(run, run.report_path, "report.json");
  ensure_parent(path);
  write_text_file(path, report_to_json(report, to_json(effective, false)).dump(2) + "\n");
  const auto table = render_report(report);
  write_text_file(path + ".txt", table);
  out << table << "wrote report " << path << '\n';
  return kExitOk;
}

inline nlohmann::json prediction_to_json(std::size_t sentence, const std::string& text,
                                         const ExtractedTriple& t, const RelationSchema& schema) {
  return {{"sentence", sentence},
          {"text", text},
          {"subject", t.subject_surface},
          {"relation", schema.name(t.relation)},
          {"object", t.object_surface},
          {"confidence", t.confidence}};
}

/// One NDJSON line per extracted triple; a sentence without triples
/// contributes no lines.
inline int cmd_extract(const Invocation& inv, std::ostream& out, std::ostream&) {
  const RunConfig& run = inv.run;
  const auto loaded = load_checkpoint(require_path(run.checkpoint_path, "checkpoint", "extract"));
  std::vector<std::string> sentences;
  if (!run.text.empty()) sentences.push_back(run.text);
  if (!run.input_path.empty()) {
    std::ifstream in(run.input_path);
    if (!in) throw ConfigError("cannot open input file '" + run.input_path + "'");
    for (std::string line; std::getline(in, line);)
      if (line.find_first_not_of(" \t\r") != std::string::npos) sentences.push_back(line);
  }
  if (run.text.empty() && run.input_path.empty()) throw ConfigError("extract needs --text or --input");
  RunConfig effective = loaded.run;
  if (inv.given("threshold")) effective.model.threshold = run.model.threshold;
  effective.model.validate();

  std::ofstream file;
  std::ostream* sink = &out;
  if (!run.predictions_path.empty()) {
    ensure_parent(run.predictions_path);
    file.open(run.predictions_path, std::ios::binary);
    if (!file) throw ConfigError("cannot write '" + run.predictions_path + "'");
    sink = &file;
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    for (const auto& t : extract(loaded.model, sentences[i], effective.model.threshold))
      *sink << prediction_to_json(i, sentences[i], t, loaded.model.schema).dump() << '\n';
  }
  if (file.is_open()) {
    file.close();
    write_provenance(run.predictions_path, inv, to_json(effective, false));
  }
  return kExitOk;
}

inline int cmd_verify(const Invocation& inv, std::ostream& out, std::ostream&) {
  bool all = true;
  for (const auto& r : run_verify(inv.run.train.seed)) {
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  return all ? kExitOk : kExitFailure;
}

/// Runs `inv.command`, translating exceptions into exit codes.
inline int run_command(const Invocation& inv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  try {
    if (inv.command == "synth") return cmd_synth(inv, out, err);
    if (inv.command == "build-lexicon") return cmd_build_lexicon(inv, out, err);
    if (inv.command == "train") return cmd_train(inv, out, err);
    if (inv.command == "eval") return cmd_eval(inv, out, err);
    if (inv.command == "extract") return cmd_extract(inv, out, err);
    if (inv.command == "verify") return cmd_verify(inv, out, err);
    err << "unknown command '" << inv.command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

/// Effective configuration from an optional config file plus flag overrides
/// (raw strings keyed by config field).
inline Invocation make_invocation(std::string command, const std::string& config_path,
                                  const std::map<std::string, std::string>& flags) {
  Invocation inv;
  inv.command = std::move(command);
  if (!config_path.empty()) {
    const auto j = read_json_file(config_path);
    apply_json(inv.run, j);
    for (const auto& [key, _] : j.items()) inv.explicit_keys.insert(key);
  }
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& field : config_fields()) {
    auto it = flags.find(field.key);
    if (it == flags.end()) continue;
    overrides[field.key] = parse_field_value(field, it->second);
    inv.explicit_keys.insert(field.key);
  }
  apply_json(inv.run, overrides);
  return inv;
}

}  // namespace casaug::cli
