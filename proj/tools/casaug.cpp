// SPDX-License-Identifier: Apache-2.0
//
// casaug <command> [--config file.json] [--<field> value ...]
#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "casaug/cli.hpp"

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = casaug::cli;
  CLI::App app{"Cascade relation extraction with subject-lexicon enhancement"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "List every configuration flag");

  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file (flags override it)");
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> options;
  for (const auto& field : casaug::config_fields()) {
    options[field.key] =
        app.add_option("--" + dashed(field.key), raw[field.key], field.help)->group("Configuration");
  }

  const std::map<std::string, std::string> descriptions = {
      {"synth", "write a synthetic train/dev/test corpus and schema"},
      {"build-lexicon", "build the subject lexicon from a corpus"},
      {"train", "train a model, writing a checkpoint and per-epoch metrics"},
      {"eval", "score a checkpoint on a test corpus"},
      {"extract", "extract triples from --text or --input"},
      {"verify", "run the numerical self-checks"},
  };
  for (const auto& name : cli::command_names()) app.add_subcommand(name, descriptions.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  std::map<std::string, std::string> given;
  for (const auto& [key, opt] : options)
    if (opt->count() > 0) given[key] = raw[key];

  cli::Invocation inv;
  try {
    inv = cli::make_invocation(app.get_subcommands().front()->get_name(), config_path, given);
  } catch (const casaug::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return cli::kExitConfig;
  }
  return cli::run_command(inv);
}
