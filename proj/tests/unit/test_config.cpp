#include <gtest/gtest.h>

#include <cstdlib>

#include "hmtl/config.hpp"
#include "hmtl/error.hpp"

namespace hmtl {
namespace {

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

RunConfig valid_config() {
  RunConfig c;
  c.data.synthetic_docs = 10;
  return c;
}

TEST(Config, ParsesKeyValueLinesAndComments) {
  const RunConfig c = parse_config("# comment\nmodel.hidden = 12\nseed=7  # trailing\n\ntrainer.sampling = uniform\n");
  EXPECT_EQ(c.model.hidden, 12);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.trainer.sampling, "uniform");
}

TEST(Config, UnknownKeyIsNamed) {
  EXPECT_EQ(field_of([] { parse_config("model.hiden = 3\n"); }), "model.hiden");
  EXPECT_EQ(field_of([] {
              RunConfig c;
              apply_override(c, "model.hidden=abc");
            }),
            "model.hidden");
}

TEST(Config, OverridesApplyAfterFile) {
  RunConfig c = parse_config("model.hidden = 12\n");
  apply_override(c, "model.hidden=20");
  EXPECT_EQ(c.model.hidden, 20);
  EXPECT_EQ(c.resolved().at("model.hidden"), "20");
}

TEST(Config, ResolvedRoundTrips) {
  RunConfig c = valid_config();
  apply_override(c, "setup=K");
  apply_override(c, "embed.char_widths=1,4");
  const RunConfig again = parse_config(c.to_text());
  EXPECT_EQ(again.resolved(), c.resolved());
}

TEST(Setups, LettersMapToHierarchies) {
  EXPECT_EQ(setup_hierarchy("A"), "ner|emd|re,cr");
  EXPECT_EQ(setup_hierarchy("B"), "ner");
  EXPECT_EQ(setup_hierarchy("C"), "emd");
  EXPECT_EQ(setup_hierarchy("D"), "re");
  EXPECT_EQ(setup_hierarchy("E"), "cr");
  EXPECT_EQ(setup_hierarchy("F"), "ner|emd");
  EXPECT_EQ(setup_hierarchy("G"), "emd|re");
  EXPECT_EQ(setup_hierarchy("H"), "emd|cr");
  EXPECT_EQ(setup_hierarchy("I"), "ner|emd|re");
  EXPECT_EQ(setup_hierarchy("J"), "ner|emd|cr");
  EXPECT_EQ(setup_hierarchy("K"), "emd|ner");
  EXPECT_EQ(setup_hierarchy("L"), "emd|ner|re,cr");
  EXPECT_TRUE(setup_uses_gold_mentions("A-GM"));
  EXPECT_TRUE(setup_uses_gold_mentions("E-GM"));
  EXPECT_FALSE(setup_uses_gold_mentions("A"));
  EXPECT_EQ(field_of([] { setup_hierarchy("Z"); }), "setup");
}

TEST(Setups, EveryLetterValidates) {
  for (const auto& letter : setup_letters()) {
    RunConfig c = valid_config();
    apply_override(c, "setup=" + letter);
    EXPECT_NO_THROW(c.validate()) << letter;
  }
}

TEST(Validate, GoldMentionsNeedCoreference) {
  RunConfig c = valid_config();
  apply_override(c, "setup=B");
  apply_override(c, "coref.gold_mentions=true");
  EXPECT_EQ(field_of([&] { c.validate(); }), "coref.gold_mentions");
}

TEST(Validate, NamesOffendingField) {
  auto check = [](const std::string& assignment, const std::string& field) {
    RunConfig c = valid_config();
    apply_override(c, assignment);
    EXPECT_EQ(field_of([&] { c.validate(); }), field) << assignment;
  };
  check("model.hidden=0", "model.hidden");
  check("model.dropout=1", "model.dropout");
  check("model.hierarchy=ner|pos", "model.hierarchy");
  check("trainer.sampling=random", "trainer.sampling");
  check("trainer.patience=-1", "trainer.patience");
  check("coref.prune_ratio=0", "coref.prune_ratio");
  check("coref.mention_loss_weight=-1", "coref.mention_loss_weight");
  check("embed.contextual_kind=bert", "embed.contextual_kind");
  check("data.split=0.5,0.1,0.1", "data.split");
}

TEST(Validate, AllEmbeddingsDisabled) {
  RunConfig c = valid_config();
  apply_override(c, "embed.word=false");
  apply_override(c, "embed.char=false");
  apply_override(c, "embed.contextual=false");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Validate, MissingDataNamesTrainKey) {
  RunConfig c;
  EXPECT_EQ(field_of([&] { c.validate(); }), "data.train");
}

TEST(Environment, SeedOverride) {
  RunConfig c;
  ::setenv("HMTL_SEED", "42", 1);
  apply_environment(c);
  ::unsetenv("HMTL_SEED");
  EXPECT_EQ(c.seed, 42u);
  apply_environment(c);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Wiring, FromConfig) {
  RunConfig c = valid_config();
  apply_override(c, "setup=L");
  const auto w = c.wiring();
  EXPECT_EQ(w.level(Task::kEmd), 1);
  EXPECT_EQ(w.level(Task::kNer), 2);
  EXPECT_EQ(w.level(Task::kRelation), 3);
}

}  // namespace
}  // namespace hmtl
