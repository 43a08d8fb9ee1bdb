#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace hmtl::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kConfigError = 2;

struct TrainOptions {
  std::filesystem::path config;
  std::vector<std::string> overrides;  // key=value
  std::filesystem::path out;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  bool gold_mentions = false;
  std::vector<std::string> overrides;
  std::filesystem::path out;
};

struct ProbeCommandOptions {
  std::filesystem::path checkpoint;
  std::vector<std::string> tasks;      // name=path, SentEval TSV
  std::vector<std::string> synthetic;  // length, word_content, bigram_shift
  int synthetic_sentences = 400;
  std::uint64_t seed = 0;
  std::vector<std::string> layers;  // empty: every layer the model has
  int epochs = 500;
  double l2 = 1e-4;
  std::filesystem::path out;
};

struct AblateOptions {
  std::filesystem::path config;
  std::vector<std::string> overrides;
  std::string spec;  // e.g. "B,C,D,E" or "-contextual,-contextual-char"
  bool parallel = false;
  std::filesystem::path out;
};

struct GenerateOptions {
  int docs = 50;
  std::uint64_t seed = 0;
  std::filesystem::path out;        // one JSONL file
  std::filesystem::path split_dir;  // or train/dev/test.jsonl in a directory
};

// Each command reports errors on `err` and returns an exit code.
int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_probe(const ProbeCommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err);
int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hmtl::cli
