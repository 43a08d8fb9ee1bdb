#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/encoder.hpp"

namespace hmtl {

class HierarchicalModel;

enum class Pooling { kMax, kAvg };

// Coordinate-wise max or mean over the rows of a non-empty matrix.
Vector sentence_embedding(const Matrix& tokens, Pooling pooling);

// g_emb-max, g_emb-avg, g_ner, g_emd, g_re, g_cr. Task layers are max-pooled.
struct ProbeLayer {
  std::string name;
  Source source = Source::kEmbeddings;
  Pooling pooling = Pooling::kMax;
};
ProbeLayer parse_probe_layer(std::string_view name);
std::vector<std::string> probe_layer_names();

struct ProbeExample {
  std::string label;
  std::vector<std::string> tokens;
};

struct ProbeTask {
  std::string name;
  std::vector<ProbeExample> train;
  std::vector<ProbeExample> dev;
  std::vector<ProbeExample> test;
  // Sorted label set over all splits.
  std::vector<std::string> classes() const;
};

// SentEval TSV: "split<TAB>label<TAB>sentence" with split tr/va/te (or
// train/dev/test) and whitespace-tokenized sentences.
ProbeTask load_probe_task(const std::filesystem::path& path, std::string name);
void write_probe_task(const std::filesystem::path& path, const ProbeTask& task);

// Desk-scale probes built from synthetic sentences: "length" (length bins),
// "word_content" (which of a few frequent words occurs) and "bigram_shift"
// (two adjacent tokens swapped or not).
ProbeTask make_synthetic_probe(std::string_view kind, std::uint64_t seed, int sentences);

struct ProbeOptions {
  int epochs = 500;
  double l2 = 1e-4;
  double learning_rate = 0.5;
};

// Multinomial logistic regression on standardized features, fit by
// full-batch gradient descent from zero.
class ProbeClassifier {
 public:
  // Throws std::invalid_argument with fewer than two training classes.
  static ProbeClassifier fit(const Matrix& x, const std::vector<int>& y, int classes,
                             const ProbeOptions& options = {});
  std::vector<int> predict(const Matrix& x) const;
  double accuracy(const Matrix& x, const std::vector<int>& y) const;

 private:
  RowVector mean_;
  RowVector scale_;
  Matrix weights_;  // features x classes
  RowVector bias_;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double dev_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Fits on `train` rows and scores the other splits (empty splits score 0).
ProbeResult train_probe(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& dev_x,
                        const std::vector<int>& dev_y, const Matrix& test_x, const std::vector<int>& test_y,
                        int classes, const ProbeOptions& options = {});

// Pooled representation of every example, computed with frozen parameters.
Matrix embed_examples(const HierarchicalModel& model, const std::vector<ProbeExample>& examples,
                      const ProbeLayer& layer);

struct ProbeGrid {
  std::vector<std::string> layers;
  std::vector<std::string> tasks;
  Matrix accuracy;  // layers x tasks (test accuracy)

  std::string to_tsv() const;
  std::string to_json() const;
};

// Rows follow `layers` in canonical layer order, columns follow the usual
// probing-task order (unknown names last, as given).
ProbeGrid run_probe_suite(const HierarchicalModel& model, const std::vector<ProbeTask>& tasks,
                          const std::vector<std::string>& layers, const ProbeOptions& options = {});

}  // namespace hmtl
