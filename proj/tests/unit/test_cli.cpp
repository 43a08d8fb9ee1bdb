#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hmtl/cli.hpp"

namespace hmtl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hmtl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << "seed = 4\n"
                      "model.hidden = 8\n"
                      "model.dropout = 0\n"
                      "embed.word_dim = 8\n"
                      "embed.char_filters = 4\n"
                      "embed.contextual_dim = 4\n"
                      "re.hidden = 8\n"
                      "coref.hidden = 8\n"
                      "coref.feature_dim = 4\n"
                      "trainer.max_updates = 20\n"
                      "trainer.eval_interval = 10\n"
                      "data.synthetic_docs = 10\n"
                      "data.seed = 2\n"
                   << extra;
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int train(const fs::path& cfg, const fs::path& out, std::vector<std::string> sets, std::ostream& err) {
  std::ostringstream sink;
  return cmd_train({cfg, std::move(sets), out}, sink, err);
}

TEST(CliTrain, SingleTaskReport) {
  const auto dir = scratch("train_b");
  std::ostringstream err;
  ASSERT_EQ(train(write_config(dir), dir / "out", {"setup=B"}, err), kOk) << err.str();
  const json report = read_json(dir / "out" / "report.json");
  EXPECT_EQ(report["tasks"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.json"));
}

TEST(CliTrain, FullHierarchyReport) {
  const auto dir = scratch("train_a");
  std::ostringstream err;
  ASSERT_EQ(train(write_config(dir), dir / "out", {"setup=A"}, err), kOk) << err.str();
  const json report = read_json(dir / "out" / "report.json");
  EXPECT_EQ(report["tasks"].size(), 4u);
  EXPECT_EQ(report["hierarchy"], "ner|emd|re,cr");
}

TEST(CliTrain, MissingDataIsAConfigError) {
  const auto dir = scratch("train_nodata");
  const fs::path cfg = dir / "empty.cfg";
  std::ofstream(cfg) << "setup = B\n";
  std::ostringstream err;
  EXPECT_EQ(train(cfg, dir / "out", {}, err), kConfigError);
  EXPECT_NE(err.str().find("data.train"), std::string::npos);
}

TEST(CliEval, GoldMentionsWithoutCoreferenceFails) {
  const auto dir = scratch("eval_gm");
  std::ostringstream err, sink;
  ASSERT_EQ(train(write_config(dir), dir / "model", {"setup=B"}, err), kOk) << err.str();
  ASSERT_EQ(cmd_generate({3, 9, dir / "data.jsonl", {}}, sink, err), kOk);
  EXPECT_EQ(cmd_eval({dir / "model" / "checkpoint", dir / "data.jsonl", true, {}, dir / "eval"}, sink, err),
            kConfigError);
}

TEST(CliEval, RepeatedEvaluationIsIdentical) {
  const auto dir = scratch("eval_twice");
  std::ostringstream err, sink;
  ASSERT_EQ(train(write_config(dir), dir / "model", {"setup=F"}, err), kOk) << err.str();
  ASSERT_EQ(cmd_generate({3, 9, dir / "data.jsonl", {}}, sink, err), kOk);
  for (const char* out : {"e1", "e2"}) {
    ASSERT_EQ(cmd_eval({dir / "model" / "checkpoint", dir / "data.jsonl", false, {}, dir / out}, sink, err), kOk)
        << err.str();
  }
  EXPECT_EQ(read_text(dir / "e1" / "metrics.json"), read_text(dir / "e2" / "metrics.json"));
  EXPECT_EQ(read_text(dir / "e1" / "predictions.jsonl"), read_text(dir / "e2" / "predictions.jsonl"));
}

TEST(CliAblate, SetupRows) {
  const auto dir = scratch("ablate_setups");
  std::ostringstream err, sink;
  ASSERT_EQ(cmd_ablate({write_config(dir), {}, "B,C,D,E", false, dir / "out"}, sink, err), kOk) << err.str();
  const json j = read_json(dir / "out" / "ablation.json");
  ASSERT_EQ(j["rows"].size(), 4u);
  EXPECT_EQ(j["rows"][2]["setup"], "D");
  EXPECT_TRUE(fs::exists(dir / "out" / "ablation.tsv"));
}

TEST(CliAblate, EmbeddingRemovalRow) {
  const auto dir = scratch("ablate_embed");
  std::ostringstream err, sink;
  ASSERT_EQ(cmd_ablate({write_config(dir, "setup = B\n"), {}, "-contextual", false, dir / "out"}, sink, err), kOk)
      << err.str();
  const json j = read_json(dir / "out" / "ablation.json");
  ASSERT_EQ(j["rows"].size(), 1u);
  EXPECT_EQ(j["rows"][0]["embeddings"]["contextual"], false);
  EXPECT_EQ(j["rows"][0]["embeddings"]["word"], true);
  EXPECT_EQ(j["rows"][0]["embeddings"]["char"], true);
}

TEST(CliAblate, BadSpecs) {
  const auto dir = scratch("ablate_bad");
  std::ostringstream err, sink;
  EXPECT_EQ(cmd_ablate({write_config(dir), {}, "", false, dir / "out"}, sink, err), kConfigError);
  EXPECT_EQ(cmd_ablate({write_config(dir), {}, "B,Q", false, dir / "out"}, sink, err), kConfigError);
  EXPECT_EQ(cmd_ablate({write_config(dir), {}, "-glove", false, dir / "out"}, sink, err), kConfigError);
}

TEST(CliRun, UnknownSubcommandIsAConfigError) {
  std::ostringstream out, err;
  std::string a0 = "hmtl", a1 = "frobnicate";
  char* argv[] = {a0.data(), a1.data()};
  EXPECT_EQ(run(2, argv, out, err), kConfigError);
}

}  // namespace
}  // namespace hmtl::cli
