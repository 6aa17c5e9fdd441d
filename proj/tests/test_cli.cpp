// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "casaug/cli.hpp"
#include "fixtures.hpp"

using namespace casaug;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path(::testing::TempDir()) / ("casaug_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& command, const std::map<std::string, std::string>& flags,
        std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run_command(cli::make_invocation(command, "", flags), out, err);
  if (out_text) *out_text = out.str();
  return code;
}

std::map<std::string, std::string> small_synth(const fs::path& dir) {
  return {{"out_dir", dir.string()}, {"sentences", "40"},      {"dev_sentences", "10"},
          {"test_sentences", "10"},  {"dim", "8"},             {"context_layers", "1"},
          {"m", "6"},                {"n", "2"},               {"epochs", "2"},
          {"batch_size", "4"}};
}

}  // namespace

TEST(Config, UnknownKeyRejected) {
  RunConfig c;
  EXPECT_THROW(apply_json(c, {{"dimension", 5}}), ConfigError);
  EXPECT_THROW(apply_json(c, nlohmann::json::array()), ConfigError);
  EXPECT_THROW(apply_json(c, {{"dim", "wide"}}), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  apply_json(c, {{"dim", 12}, {"ablation", "disable-enhancement"}, {"seed", 11}, {"distance", "cosine"}});
  EXPECT_EQ(c.model.encoder.dim, 12U);
  EXPECT_TRUE(c.model.disable_enhancement);
  EXPECT_EQ(c.synth.seed, 11U);
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_FALSE(to_json(c, false).contains("checkpoint"));
}

TEST(Config, SeedKeyOnlyWhenPresent) {
  RunConfig c;
  c.synth.seed = 99;
  apply_json(c, {{"dim", 4}});
  EXPECT_EQ(c.synth.seed, 99U);
}

TEST(Config, FieldParsing) {
  const auto& fields = config_fields();
  const auto field = [&](const std::string& k) {
    return *std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) { return f.key == k; });
  };
  EXPECT_EQ(parse_field_value(field("dim"), "16"), 16);
  EXPECT_EQ(parse_field_value(field("learning_rate"), "0.5"), 0.5);
  EXPECT_EQ(parse_field_value(field("distance"), "cosine"), "cosine");
  EXPECT_THROW(parse_field_value(field("dim"), "-3"), ConfigError);
  EXPECT_THROW(parse_field_value(field("dim"), "3x"), ConfigError);
  EXPECT_THROW(parse_field_value(field("threshold"), "high"), ConfigError);
}

TEST(Invocation, FlagsOverrideConfigFile) {
  const auto dir = fresh_dir("precedence");
  const auto path = (dir / "cfg.json").string();
  write_text_file(path, R"({"dim": 20, "epochs": 3})");
  const auto inv = cli::make_invocation("train", path, {{"epochs", "9"}});
  EXPECT_EQ(inv.run.model.encoder.dim, 20U);
  EXPECT_EQ(inv.run.train.epochs, 9U);
  EXPECT_TRUE(inv.given("dim"));
  EXPECT_TRUE(inv.given("epochs"));
  EXPECT_FALSE(inv.given("threshold"));
  EXPECT_THROW(cli::make_invocation("train", (dir / "missing.json").string(), {}), ConfigError);
}

TEST(ExitCodes, ConfigurationErrors) {
  EXPECT_EQ(run("synth", {{"mix_normal", "0.9"}, {"out_dir", fresh_dir("badmix").string()}}), cli::kExitConfig);
  EXPECT_EQ(run("train", {}), cli::kExitConfig);
  EXPECT_EQ(run("build-lexicon", {{"train", "/nonexistent/train.jsonl"}}), cli::kExitConfig);
  EXPECT_EQ(run("eval", {{"checkpoint", "/nonexistent/ck.json"}, {"test", "x"}}), cli::kExitConfig);
  EXPECT_EQ(run("bogus", {}), cli::kExitConfig);
}

TEST(ExitCodes, EmptyCorpusIsRuntimeFailure) {
  const auto dir = fresh_dir("empty");
  write_text_file((dir / "train.jsonl").string(), "");
  EXPECT_EQ(run("train", {{"train", (dir / "train.jsonl").string()}}), cli::kExitFailure);
}

TEST(ExitCodes, VerifyPasses) {
  std::string out;
  EXPECT_EQ(run("verify", {}, &out), cli::kExitOk);
  EXPECT_EQ(out.find("[FAIL]"), std::string::npos) << out;
  EXPECT_NE(out.find("[PASS] grad_check"), std::string::npos);
}

TEST(Synth, ByteIdenticalAndLoadable) {
  const auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  ASSERT_EQ(run("synth", small_synth(a)), cli::kExitOk);
  ASSERT_EQ(run("synth", small_synth(b)), cli::kExitOk);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "schema.json", "train.jsonl.provenance.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto ds = load_dataset((a / "train.jsonl").string(), read_schema((a / "schema.json").string()));
  EXPECT_EQ(ds.sentences.size(), 40U);
  EXPECT_TRUE(ds.errors.empty());
  EXPECT_TRUE(ds.dropped.empty());
  const auto prov = read_json_file((a / "train.jsonl.provenance.json").string());
  EXPECT_EQ(prov["command"], "synth");
  EXPECT_EQ(prov["seed"], 7);
  EXPECT_NE(slurp(a / "train.jsonl"), slurp(a / "test.jsonl"));
}

TEST(Pipeline, TrainEvalExtract) {
  const auto dir = fresh_dir("pipeline");
  auto flags = small_synth(dir);
  ASSERT_EQ(run("synth", flags), cli::kExitOk);
  flags["train"] = (dir / "train.jsonl").string();
  flags["dev"] = (dir / "dev.jsonl").string();
  flags["test"] = (dir / "test.jsonl").string();
  ASSERT_EQ(run("build-lexicon", flags), cli::kExitOk);
  const auto lexicon = read_json_file((dir / "lexicon.json").string());
  EXPECT_EQ(lexicon["relations"].size(), 4U);
  EXPECT_EQ(lexicon["config"]["m"], 6);

  flags["lexicon"] = (dir / "lexicon.json").string();
  ASSERT_EQ(run("train", flags), cli::kExitOk);
  std::ifstream metrics(dir / "metrics.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(metrics, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], lines + 1);
    EXPECT_TRUE(j["dev_f1"].is_number());
  }
  EXPECT_EQ(lines, 2U);

  flags["checkpoint"] = (dir / "checkpoint.json").string();
  std::string table;
  ASSERT_EQ(run("eval", flags, &table), cli::kExitOk);
  EXPECT_NE(table.find("ALL"), std::string::npos);
  const auto report = read_json_file((dir / "report.json").string());
  EXPECT_EQ(report["config_echo"]["dim"], 8);
  EXPECT_FALSE(report["config_echo"].contains("checkpoint"));

  // checkpoint round trip reproduces in-process extraction
  const auto loaded = load_checkpoint((dir / "checkpoint.json").string());
  const auto test = load_dataset((dir / "test.jsonl").string(), loaded.model.schema);
  std::ofstream input(dir / "input.txt");
  for (const auto& s : test.sentences) input << s.text << '\n';
  input.close();
  flags["input"] = (dir / "input.txt").string();
  flags["predictions"] = (dir / "predictions.jsonl").string();
  ASSERT_EQ(run("extract", flags), cli::kExitOk);
  std::ostringstream expected;
  for (std::size_t i = 0; i < test.sentences.size(); ++i)
    for (const auto& t : extract(loaded.model, test.sentences[i].text, loaded.run.model.threshold))
      expected << cli::prediction_to_json(i, test.sentences[i].text, t, loaded.model.schema).dump() << '\n';
  EXPECT_EQ(slurp(dir / "predictions.jsonl"), expected.str());
}

TEST(Checkpoint, RoundTripPreservesExtraction) {
  const auto corpus = casaug::testing::memo_fixture();
  ModelConfig cfg;
  cfg.encoder.dim = 6;
  cfg.m = 4;
  cfg.n = 2;
  cfg.threshold = 0.45;
  const auto model = Model::create(cfg, casaug::testing::memo_schema(), corpus, InitMode::Random, 13);
  RunConfig run;
  run.model = cfg;
  const auto path = (fresh_dir("checkpoint") / "ck.json").string();
  save_checkpoint(path, model, run);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.model.schema, model.schema);
  EXPECT_EQ(loaded.run.model.threshold, 0.45);
  for (const auto& s : corpus) {
    const auto a = extract(model, s.text, 0.45), b = extract(loaded.model, s.text, 0.45);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].subject, b[k].subject);
      EXPECT_EQ(a[k].relation, b[k].relation);
      EXPECT_EQ(a[k].object, b[k].object);
      EXPECT_EQ(a[k].confidence, b[k].confidence);
    }
  }
  const auto pa = model.params.named(), pb = loaded.model.params.named();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    const auto x = pa[k].second.data(), y = pb[k].second.data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end())) << pa[k].first;
  }
}

TEST(Extract, NoSubjectWritesNoLines) {
  const auto dir = fresh_dir("nosubject");
  const auto corpus = casaug::testing::memo_fixture();
  ModelConfig cfg;
  cfg.encoder.dim = 4;
  cfg.m = 3;
  cfg.n = 2;
  RunConfig rc;
  rc.model = cfg;
  const auto model = Model::create(cfg, casaug::testing::memo_schema(), corpus, InitMode::Zero, 0);
  const auto ck = (dir / "ck.json").string();
  save_checkpoint(ck, model, rc);
  const auto predictions = dir / "p.jsonl";
  EXPECT_EQ(run("extract", {{"checkpoint", ck}, {"text", "Ada Lind was born in Oslo ."},
                            {"predictions", predictions.string()}}),
            cli::kExitOk);
  EXPECT_TRUE(fs::exists(predictions));
  EXPECT_EQ(slurp(predictions), "");
  EXPECT_EQ(run("extract", {{"checkpoint", ck}}), cli::kExitConfig);
}

TEST(Binary, HelpAndBadFlag) {
  const std::string exe = CASAUG_CLI_PATH;
  const auto status = [](const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(status(exe + " --help"), 0);
  EXPECT_EQ(status(exe + " verify --seed 3"), 0);
  EXPECT_EQ(status(exe + " train --dim notanumber"), 2);
  EXPECT_EQ(status(exe + " train --no-such-flag 1"), 2);
  EXPECT_EQ(status(exe), 2);
}
