#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/coref.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/encoder.hpp"

namespace hmtl {

struct EmbeddingConfig {
  bool use_word = true;
  bool use_char = true;
  bool use_contextual = true;
  int word_dim = 50;
  std::string word_vectors;  // optional pretrained text file
  bool freeze_words = false;
  int char_dim = 16;
  std::vector<int> char_widths = {2, 3};
  int char_filters = 25;
  std::string contextual_kind = "hash";  // hash | zero | file
  int contextual_dim = 32;
  std::string contextual_path;
};

struct ModelConfig {
  std::string hierarchy = "ner|emd|re,cr";
  int hidden = 64;
  int layers = 1;
  double dropout = 0.2;
  bool constrained_decoding = false;
  EmbeddingConfig embedding;
  CorefOptions coref;
  bool gold_mentions = false;  // coreference evaluation over gold mentions
  int re_hidden = 64;
  double re_threshold = 0.5;
  std::string re_types;  // empty: from training data; "ace05"; or a comma list
};

struct TrainerConfig {
  std::string sampling = "proportional";  // proportional | uniform
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  int batch_size = 8;  // sentences; coreference always uses one document
  int patience = 5;
  long max_updates = 20000;
  long eval_interval = 0;  // 0: one epoch of the smallest training set
  std::string checkpoint = "best";  // best | final
};

struct DataConfig {
  std::string train;
  std::string dev;
  std::string test;
  std::string corpus;  // a single JSONL file split by `split`
  int synthetic_docs = 0;
  std::uint64_t seed = 0;  // generation and splitting
  SplitRatios split;
  std::string ner_train;  // optional NER-only data (JSONL or CoNLL)
  std::string ner_dev;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string setup;  // A..L, A-GM, E-GM; empty for a custom hierarchy
  ModelConfig model;
  TrainerConfig trainer;
  DataConfig data;

  // Every key with its current value, defaults included.
  std::map<std::string, std::string> resolved() const;
  std::string to_text() const;
  HierarchyWiring wiring() const;
  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Task levels of a lettered setup, e.g. "K" -> "emd|ner".
std::string setup_hierarchy(std::string_view letter);
bool setup_uses_gold_mentions(std::string_view letter);
std::vector<std::string> setup_letters();

// Sets one dotted key. Setting `setup` also sets the hierarchy and the
// gold-mention flag.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
// "key=value" form.
void apply_override(RunConfig& config, std::string_view assignment);
// Reads "key = value" lines; '#' starts a comment.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
// HMTL_SEED replaces the configured seed when set.
void apply_environment(RunConfig& config);

}  // namespace hmtl
