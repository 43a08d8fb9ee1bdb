#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/config.hpp"
#include "hmtl/coref.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/crf.hpp"
#include "hmtl/embedder.hpp"
#include "hmtl/encoder.hpp"
#include "hmtl/metrics.hpp"
#include "hmtl/relation.hpp"

namespace hmtl {

struct LabelSets {
  std::vector<std::string> ner;
  std::vector<std::string> emd;
  std::vector<std::string> relation;
};

// Sorted label inventories found in the documents.
LabelSets collect_labels(const std::vector<Document>& docs);

struct DocumentPrediction {
  std::string doc_id;
  std::vector<TaggedSpan> ner;
  std::vector<TaggedSpan> emd;
  std::vector<RelationPrediction> relations;
  std::vector<Cluster> clusters;
};

class HierarchicalModel;

// Lazily computed representations of one document on one tape. Each
// (source, sentence) pair is built at most once.
class ForwardPass {
 public:
  ForwardPass(const HierarchicalModel& model, Tape& tape, const Document& doc, Rng* dropout_rng);

  // n_s x dim rows of one sentence.
  Var sentence(Source source, int index);
  // All document rows, sentences concatenated in order.
  Var document(Source source);

  Tape& tape() { return tape_; }
  const Document& doc() const { return doc_; }

 private:
  Var encoder_input(Task task, int index);

  const HierarchicalModel& model_;
  Tape& tape_;
  const Document& doc_;
  Rng* rng_;
  std::vector<int> offsets_;
  std::vector<std::vector<std::string>> tokens_;
  std::map<std::pair<Source, int>, Var> sentence_cache_;
  std::map<Source, Var> document_cache_;
};

// Embeddings, one encoder per configured task wired by the hierarchy, and
// the task heads. Parameters live in one store and are grouped by task.
class HierarchicalModel {
 public:
  HierarchicalModel(const ModelConfig& config, Vocabulary words, Vocabulary chars, LabelSets labels,
                    std::uint64_t seed, const WordTable* pretrained = nullptr);

  // Vocabularies and labels from `train` (plus pretrained vectors, when
  // configured).
  static HierarchicalModel build(const ModelConfig& config, const std::vector<Document>& train,
                                 std::uint64_t seed);

  HierarchicalModel(HierarchicalModel&&) = default;
  HierarchicalModel& operator=(HierarchicalModel&&) = default;

  const ModelConfig& config() const { return config_; }
  const HierarchyWiring& wiring() const { return wiring_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const LabelSets& labels() const { return labels_; }
  const Vocabulary& words() const { return embedder_.words(); }
  const Vocabulary& chars() const { return chars_; }
  const Embedder& embedder() const { return embedder_; }

  bool has(Task task) const { return wiring_.has(task); }
  const BiRecurrentEncoder& encoder(Task task) const { return encoders_.at(task); }
  int source_dim(Source source) const;
  const CrfHead& crf(Task task) const;
  const CorefHead& coref() const { return *coref_; }
  const RelationHead& relation() const { return *relation_; }

  // Summed CRF negative log-likelihood (ner, emd) or BCE (re) of one
  // sentence. Returns an empty Var when the sentence gives no signal.
  Var sentence_loss(ForwardPass& pass, Task task, int sentence) const;
  // Coreference marginal log-likelihood of the whole document.
  Var document_loss(ForwardPass& pass) const;

  DocumentPrediction predict(const Document& doc, const std::vector<Task>& tasks,
                             bool gold_mentions) const;
  DocumentPrediction predict(const Document& doc, bool gold_mentions = false) const {
    return predict(doc, wiring_.tasks(), gold_mentions);
  }
  MetricReport evaluate(const std::vector<Document>& docs, const std::vector<Task>& tasks,
                        bool gold_mentions) const;

  // Gradient-free sentence representation from any source.
  Matrix representation(const Document& doc, int sentence, Source source) const;

 private:
  ModelConfig config_;
  HierarchyWiring wiring_;
  ParameterStore store_;
  LabelSets labels_;
  Vocabulary chars_;
  Embedder embedder_;
  std::map<Task, BiRecurrentEncoder> encoders_;
  std::optional<CrfHead> ner_;
  std::optional<CrfHead> emd_;
  std::optional<CorefHead> coref_;
  std::optional<RelationHead> relation_;
};

// Sentence-relative last tokens of the gold mention heads of a sentence.
std::vector<int> gold_head_lasts(const Document& doc, int sentence);

}  // namespace hmtl
