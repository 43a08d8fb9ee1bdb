#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hmtl/task.hpp"

namespace hmtl {

// Inclusive token range [start, end] over document-level token offsets.
struct TaggedSpan {
  int start = 0;
  int end = 0;
  std::string label;

  int width() const { return end - start + 1; }
  bool same_bounds(const TaggedSpan& other) const {
    return start == other.start && end == other.end;
  }
  auto operator<=>(const TaggedSpan&) const = default;
};

struct RelationInstance {
  std::string type;
  TaggedSpan arg1;
  TaggedSpan arg2;

  auto operator<=>(const RelationInstance&) const = default;
};

using Cluster = std::vector<TaggedSpan>;

struct Document {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  std::vector<TaggedSpan> ner_spans;
  std::vector<TaggedSpan> emd_spans;  // mention heads
  std::vector<RelationInstance> relations;
  std::vector<Cluster> clusters;

  int token_count() const;
  // Document offset of the first token of each sentence.
  std::vector<int> sentence_offsets() const;
  // Index of the sentence containing `token`.
  int sentence_of(int token) const;
  std::vector<std::string> tokens() const;

  bool operator==(const Document&) const = default;
};

// Throws ValidationError on the first violated invariant. Does not mutate;
// call normalize_clusters first to drop singleton clusters.
void validate(const Document& doc);
// Drops clusters with fewer than two members and sorts each cluster.
void normalize_clusters(Document& doc);

// One JSON record per line; see README for the schema.
std::vector<Document> load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs);
std::string to_jsonl_record(const Document& doc);
// `line` is used in error messages only.
Document parse_jsonl_record(const std::string& text, int line = 0);

struct ConllStats {
  int sentences = 0;
  int spans = 0;
  int repairs = 0;  // dangling or inconsistent tags that opened a fresh span
};

// CoNLL-2003 style columns: token first, tag last, blank lines between
// sentences, -DOCSTART- lines between documents. Accepts BIO, IOB1 and
// BILOU/BIOES prefixes. Without -DOCSTART- markers every sentence becomes its
// own document.
std::vector<Document> load_conll_ner(const std::filesystem::path& path,
                                     ConllStats* stats = nullptr);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct DocumentSplit {
  std::vector<Document> train;
  std::vector<Document> dev;
  std::vector<Document> test;
};

// Disjoint, exhaustive, seed-deterministic partition. Split sizes are
// round(ratio * n) for train and dev; test takes the remainder.
DocumentSplit split_documents(const std::vector<Document>& docs, SplitRatios ratios,
                              std::uint64_t seed);

enum class Split { kTrain, kDev, kTest };
std::string_view split_name(Split split);

struct DatasetHandle {
  Task task = Task::kNer;
  Split split = Split::kTrain;
  std::string name;
  std::size_t sentences = 0;
};

// Per-task dataset handles. Exactly one training dataset per task.
class DatasetRegistry {
 public:
  void add(DatasetHandle handle);
  const DatasetHandle& training(Task task) const;
  bool has_training(Task task) const;
  std::vector<DatasetHandle> handles() const { return handles_; }
  std::map<Task, std::size_t> training_sizes() const;

 private:
  std::vector<DatasetHandle> handles_;
};

std::size_t count_sentences(const std::vector<Document>& docs);

}  // namespace hmtl
