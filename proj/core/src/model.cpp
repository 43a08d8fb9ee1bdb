#include "hmtl/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hmtl/error.hpp"
#include "hmtl/logging.hpp"

namespace hmtl {

LabelSets collect_labels(const std::vector<Document>& docs) {
  std::set<std::string> ner, emd, rel;
  for (const auto& d : docs) {
    for (const auto& s : d.ner_spans) ner.insert(s.label);
    for (const auto& s : d.emd_spans) emd.insert(s.label);
    for (const auto& r : d.relations) rel.insert(r.type);
  }
  return {{ner.begin(), ner.end()}, {emd.begin(), emd.end()}, {rel.begin(), rel.end()}};
}

std::vector<int> gold_head_lasts(const Document& doc, int sentence) {
  const auto offsets = doc.sentence_offsets();
  const int begin = offsets[static_cast<std::size_t>(sentence)];
  const int end = begin + static_cast<int>(doc.sentences[static_cast<std::size_t>(sentence)].size());
  std::vector<int> out;
  for (const auto& m : doc.emd_spans) {
    if (m.start >= begin && m.end < end) out.push_back(m.end - begin);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Spans of `spans` inside [begin, begin + n), shifted to sentence offsets.
std::vector<TaggedSpan> sentence_spans(const std::vector<TaggedSpan>& spans, int begin, int n) {
  std::vector<TaggedSpan> out;
  for (const auto& s : spans) {
    if (s.start >= begin && s.end < begin + n) out.push_back({s.start - begin, s.end - begin, s.label});
  }
  return out;
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
}

}  // namespace

// ---------------------------------------------------------------------------

ForwardPass::ForwardPass(const HierarchicalModel& model, Tape& tape, const Document& doc,
                         Rng* dropout_rng)
    : model_(model), tape_(tape), doc_(doc), rng_(dropout_rng), offsets_(doc.sentence_offsets()) {}

Var ForwardPass::encoder_input(Task task, int index) {
  std::vector<Var> parts;
  for (Source s : model_.wiring().inputs(task)) parts.push_back(sentence(s, index));
  return ops::concat_cols(tape_, parts);
}

Var ForwardPass::sentence(Source source, int index) {
  auto key = std::make_pair(source, index);
  if (auto it = sentence_cache_.find(key); it != sentence_cache_.end()) return it->second;
  const auto& tokens = doc_.sentences.at(static_cast<std::size_t>(index));
  Var out;
  if (source == Source::kEmbeddings) {
    SentenceContext ctx{doc_.doc_id, offsets_[static_cast<std::size_t>(index)], tokens};
    out = model_.embedder().embed(tape_, ctx);
  } else if (source == Source::kCoref) {
    out = ops::slice_rows(tape_, document(source), offsets_[static_cast<std::size_t>(index)],
                          static_cast<int>(tokens.size()));
  } else {
    const Task task = *parse_task(source_name(source));
    out = model_.encoder(task).encode(tape_, encoder_input(task, index), rng_ ? model_.config().dropout : 0.0,
                                      rng_);
  }
  sentence_cache_.emplace(key, out);
  return out;
}

Var ForwardPass::document(Source source) {
  if (auto it = document_cache_.find(source); it != document_cache_.end()) return it->second;
  const int n = static_cast<int>(doc_.sentences.size());
  std::vector<Var> rows;
  Var out;
  if (source == Source::kCoref) {
    for (int i = 0; i < n; ++i) rows.push_back(encoder_input(Task::kCoref, i));
    out = model_.encoder(Task::kCoref)
              .encode(tape_, ops::concat_rows(tape_, rows), rng_ ? model_.config().dropout : 0.0, rng_);
  } else {
    for (int i = 0; i < n; ++i) rows.push_back(sentence(source, i));
    out = ops::concat_rows(tape_, rows);
  }
  document_cache_.emplace(source, out);
  return out;
}

// ---------------------------------------------------------------------------

HierarchicalModel::HierarchicalModel(const ModelConfig& config, Vocabulary words, Vocabulary chars,
                                     LabelSets labels, std::uint64_t seed, const WordTable* pretrained)
    : config_(config), labels_(std::move(labels)), chars_(std::move(chars)) {
  wiring_ = HierarchyWiring::parse(config_.hierarchy);
  wiring_.validate();
  Rng rng(seed);
  const auto& ec = config_.embedding;

  Parameter* word_table = nullptr;
  if (ec.use_word) {
    const int dim = pretrained ? static_cast<int>(pretrained->vectors.cols()) : ec.word_dim;
    Matrix table = uniform_matrix(words.size(), dim, 0.1, rng);
    table.row(Vocabulary::kPad).setZero();
    if (pretrained) {
      for (int i = 0; i < pretrained->vocab.size(); ++i) {
        const int row = words.exact(pretrained->vocab.entries()[static_cast<std::size_t>(i)]);
        if (row >= 0) table.row(row) = pretrained->vectors.row(i);
      }
    }
    word_table = &store_.add("embed.words", Group::kEmbeddings, std::move(table), true);
    word_table->trainable = !ec.freeze_words;
  }
  std::optional<CharCNN> cnn;
  if (ec.use_char) {
    CharCNN::Options opts{ec.char_dim, ec.char_widths, ec.char_filters};
    cnn = CharCNN::create(store_, "embed.char", chars_, opts, rng);
  }
  std::shared_ptr<const ContextualEmbedder> contextual;
  if (ec.use_contextual) {
    if (ec.contextual_kind == "zero") {
      contextual = std::make_shared<ZeroContextualEmbedder>(ec.contextual_dim);
    } else if (ec.contextual_kind == "file") {
      contextual = std::make_shared<FileContextualEmbedder>(ec.contextual_path, ec.contextual_dim);
    } else {
      contextual = std::make_shared<HashContextualEmbedder>(ec.contextual_dim);
    }
  }
  embedder_ = Embedder(std::move(words), word_table, std::move(cnn), std::move(contextual),
                       Embedder::Options{ec.use_word, ec.use_char, ec.use_contextual});

  for (Task task : wiring_.tasks()) {
    const std::string name(task_name(task));
    const Group group = group_of(task);
    int in = 0;
    for (Source s : wiring_.inputs(task)) in += source_dim(s);
    encoders_.emplace(task, BiRecurrentEncoder::create(store_, name + ".encoder", group, in,
                                                       config_.hidden, config_.layers, rng));
    const int out = encoders_.at(task).output_dim();
    switch (task) {
      case Task::kNer:
        ner_ = CrfHead::create(store_, "ner.crf", group, out, BilouTagset(labels_.ner), rng);
        break;
      case Task::kEmd:
        emd_ = CrfHead::create(store_, "emd.crf", group, out, BilouTagset(labels_.emd), rng);
        break;
      case Task::kCoref:
        coref_ = CorefHead::create(store_, "cr.head", group, out, config_.coref, rng);
        break;
      case Task::kRelation:
        if (labels_.relation.empty()) throw ConfigError("re.types", "no relation types available");
        relation_ = RelationHead::create(store_, "re.head", group, out, labels_.relation,
                                         {config_.re_hidden, config_.re_threshold}, rng);
        break;
    }
  }
}

HierarchicalModel HierarchicalModel::build(const ModelConfig& config, const std::vector<Document>& train,
                                           std::uint64_t seed) {
  Vocabulary words;
  Vocabulary chars;
  std::optional<WordTable> pretrained;
  if (config.embedding.use_word && !config.embedding.word_vectors.empty()) {
    pretrained = load_word_vectors(config.embedding.word_vectors, config.embedding.word_dim);
    for (const auto& w : pretrained->vocab.entries()) words.add(w);
  }
  for (const auto& d : train) {
    for (const auto& s : d.sentences) {
      for (const auto& tok : s) {
        if (words.exact(tok) < 0 && words.exact(to_lower_ascii(tok)) < 0) words.add(tok);
        for (const auto& c : utf8_chars(tok)) chars.add(c);
      }
    }
  }
  LabelSets labels = collect_labels(train);
  const std::string& types = config.re_types;
  if (types == "ace05") {
    labels.relation = ace05_relation_types();
  } else if (!types.empty()) {
    labels.relation.clear();
    std::string item;
    for (char c : types + ",") {
      if (c == ',') {
        if (!item.empty()) labels.relation.push_back(item);
        item.clear();
      } else if (c != ' ') {
        item += c;
      }
    }
  }
  return HierarchicalModel(config, std::move(words), std::move(chars), std::move(labels), seed,
                           pretrained ? &*pretrained : nullptr);
}

int HierarchicalModel::source_dim(Source source) const {
  if (source == Source::kEmbeddings) return embedder_.output_dim();
  return 2 * config_.hidden;
}

const CrfHead& HierarchicalModel::crf(Task task) const {
  if (task == Task::kNer && ner_) return *ner_;
  if (task == Task::kEmd && emd_) return *emd_;
  throw std::logic_error("no CRF head for task " + std::string(task_name(task)));
}

Var HierarchicalModel::sentence_loss(ForwardPass& pass, Task task, int sentence) const {
  const Document& doc = pass.doc();
  Tape& tape = pass.tape();
  const int begin = doc.sentence_offsets()[static_cast<std::size_t>(sentence)];
  const int n = static_cast<int>(doc.sentences[static_cast<std::size_t>(sentence)].size());
  switch (task) {
    case Task::kNer:
    case Task::kEmd: {
      const CrfHead& head = crf(task);
      const auto& gold = task == Task::kNer ? doc.ner_spans : doc.emd_spans;
      std::vector<int> tags = spans_to_tags(sentence_spans(gold, begin, n), n, head.tagset());
      Var emissions = head.emissions(tape, pass.sentence(source_of(task), sentence));
      return head.nll(tape, emissions, std::move(tags));
    }
    case Task::kRelation: {
      std::vector<int> heads = gold_head_lasts(doc, sentence);
      if (heads.size() < 2) return Var();
      auto pairs = candidate_pairs(heads);
      Matrix targets = relation_targets(pairs, doc.relations, begin, relation_->types());
      Var logits = relation_->logits(tape, pass.sentence(Source::kRelation, sentence), pairs);
      return relation_->loss(tape, logits, targets);
    }
    case Task::kCoref:
      break;
  }
  throw std::logic_error("coreference is trained per document");
}

Var HierarchicalModel::document_loss(ForwardPass& pass) const {
  CorefHead::Forward f = coref_->forward(pass.tape(), pass.document(Source::kCoref));
  return coref_->loss(pass.tape(), f, pass.doc().clusters);
}

DocumentPrediction HierarchicalModel::predict(const Document& doc, const std::vector<Task>& tasks,
                                              bool gold_mentions) const {
  Tape tape(false);
  ForwardPass pass(*this, tape, doc, nullptr);
  DocumentPrediction out;
  out.doc_id = doc.doc_id;
  auto wants = [&](Task t) { return has(t) && std::find(tasks.begin(), tasks.end(), t) != tasks.end(); };
  const auto offsets = doc.sentence_offsets();
  const int sentences = static_cast<int>(doc.sentences.size());

  auto tag = [&](Task task, std::vector<TaggedSpan>& dest) {
    const CrfHead& head = crf(task);
    for (int i = 0; i < sentences; ++i) {
      const Matrix& e = tape.value(head.emissions(tape, pass.sentence(source_of(task), i)));
      std::vector<int> tags = head.decode(e, config_.constrained_decoding);
      for (auto s : tags_to_spans(tags, head.tagset())) {
        s.start += offsets[static_cast<std::size_t>(i)];
        s.end += offsets[static_cast<std::size_t>(i)];
        dest.push_back(std::move(s));
      }
    }
  };
  if (wants(Task::kNer)) tag(Task::kNer, out.ner);
  const bool need_emd = wants(Task::kEmd) || (wants(Task::kRelation) && has(Task::kEmd));
  if (need_emd) tag(Task::kEmd, out.emd);

  if (wants(Task::kRelation)) {
    for (int i = 0; i < sentences; ++i) {
      const int begin = offsets[static_cast<std::size_t>(i)];
      const int n = static_cast<int>(doc.sentences[static_cast<std::size_t>(i)].size());
      std::vector<int> heads;
      if (has(Task::kEmd)) {
        for (const auto& m : sentence_spans(out.emd, begin, n)) heads.push_back(m.end);
      } else {
        heads = gold_head_lasts(doc, i);
      }
      auto pairs = candidate_pairs(heads);
      if (pairs.empty()) continue;
      Matrix probs = sigmoid(tape.value(relation_->logits(tape, pass.sentence(Source::kRelation, i), pairs)));
      for (auto r : decode_relations(pairs, probs, heads, relation_->options().threshold, relation_->types())) {
        r.arg1_last += begin;
        r.arg2_last += begin;
        out.relations.push_back(std::move(r));
      }
    }
  }
  if (!wants(Task::kEmd)) out.emd.clear();

  if (wants(Task::kCoref)) {
    const Matrix& g = tape.value(pass.document(Source::kCoref));
    if (gold_mentions) {
      std::vector<SpanBounds> mentions = mention_bounds(doc.clusters);
      out.clusters = coref_->predict(g, &mentions);
    } else {
      out.clusters = coref_->predict(g);
    }
  }
  return out;
}

MetricReport HierarchicalModel::evaluate(const std::vector<Document>& docs, const std::vector<Task>& tasks,
                                         bool gold_mentions) const {
  std::map<Task, MatchCounts> counts;
  CorefCounts coref;
  auto wants = [&](Task t) { return has(t) && std::find(tasks.begin(), tasks.end(), t) != tasks.end(); };
  for (const auto& doc : docs) {
    DocumentPrediction p = predict(doc, tasks, gold_mentions);
    if (wants(Task::kNer)) counts[Task::kNer] += span_counts(p.ner, doc.ner_spans);
    if (wants(Task::kEmd)) counts[Task::kEmd] += span_counts(p.emd, doc.emd_spans);
    if (wants(Task::kRelation)) {
      std::vector<RelationKey> pred, gold;
      for (const auto& r : p.relations) pred.push_back(relation_key(r));
      for (const auto& r : doc.relations) gold.push_back(relation_key(r));
      counts[Task::kRelation] += relation_counts(pred, gold);
    }
    if (wants(Task::kCoref)) {
      const auto pred = gold_mentions ? restrict_to_mentions(p.clusters, doc.clusters) : p.clusters;
      coref += coref_counts(pred, doc.clusters);
    }
  }
  MetricReport report;
  for (const auto& [task, c] : counts) report.spans[task] = c.prf();
  if (wants(Task::kCoref)) report.coref = coref.report();
  report.gold_mentions = gold_mentions && wants(Task::kCoref);
  return report;
}

Matrix HierarchicalModel::representation(const Document& doc, int sentence, Source source) const {
  Tape tape(false);
  ForwardPass pass(*this, tape, doc, nullptr);
  return tape.value(pass.sentence(source, sentence));
}

}  // namespace hmtl
