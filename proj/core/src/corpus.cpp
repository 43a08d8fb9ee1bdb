#include "hmtl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hmtl/autograd.hpp"
#include "hmtl/error.hpp"

namespace hmtl {

using json = nlohmann::ordered_json;

int Document::token_count() const {
  int n = 0;
  for (const auto& s : sentences) n += static_cast<int>(s.size());
  return n;
}

std::vector<int> Document::sentence_offsets() const {
  std::vector<int> offsets;
  offsets.reserve(sentences.size());
  int off = 0;
  for (const auto& s : sentences) {
    offsets.push_back(off);
    off += static_cast<int>(s.size());
  }
  return offsets;
}

int Document::sentence_of(int token) const {
  int off = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    off += static_cast<int>(sentences[i].size());
    if (token < off) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> Document::tokens() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(token_count()));
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

namespace {

std::string describe(const TaggedSpan& s) {
  std::ostringstream os;
  os << "[" << s.start << "," << s.end;
  if (!s.label.empty()) os << "," << s.label;
  os << "]";
  return os.str();
}

void check_bounds(const Document& doc, const TaggedSpan& s, int n, const char* layer) {
  if (s.start < 0 || s.start > s.end || s.end >= n) {
    throw ValidationError(doc.doc_id, std::string(layer) + " span " + describe(s) +
                                          " out of range for " + std::to_string(n) + " tokens");
  }
}

void check_layer(const Document& doc, const std::vector<TaggedSpan>& spans, int n,
                 const char* layer) {
  std::vector<TaggedSpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    check_bounds(doc, sorted[i], n, layer);
    if (doc.sentence_of(sorted[i].start) != doc.sentence_of(sorted[i].end)) {
      throw ValidationError(doc.doc_id, std::string(layer) + " span " + describe(sorted[i]) +
                                            " crosses a sentence boundary");
    }
    if (sorted[i].label.empty()) {
      throw ValidationError(doc.doc_id, std::string(layer) + " span " + describe(sorted[i]) +
                                            " has no label");
    }
    if (i > 0 && sorted[i].start <= sorted[i - 1].end) {
      throw ValidationError(doc.doc_id, std::string(layer) + " spans " +
                                            describe(sorted[i - 1]) + " and " +
                                            describe(sorted[i]) + " overlap");
    }
  }
}

}  // namespace

void validate(const Document& doc) {
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    if (doc.sentences[i].empty()) {
      throw ValidationError(doc.doc_id, "sentence " + std::to_string(i) + " is empty");
    }
  }
  const int n = doc.token_count();
  if (n == 0) throw ValidationError(doc.doc_id, "document has no tokens");

  check_layer(doc, doc.ner_spans, n, "ner");
  check_layer(doc, doc.emd_spans, n, "mention");

  for (const auto& rel : doc.relations) {
    if (rel.type.empty()) throw ValidationError(doc.doc_id, "relation without a type");
    for (const TaggedSpan* arg : {&rel.arg1, &rel.arg2}) {
      check_bounds(doc, *arg, n, "relation argument");
      bool found = std::any_of(doc.emd_spans.begin(), doc.emd_spans.end(),
                               [&](const TaggedSpan& m) { return m.same_bounds(*arg); });
      if (!found) {
        throw ValidationError(doc.doc_id, "relation argument " + describe(*arg) +
                                              " is not a mention head");
      }
    }
    if (rel.arg1.same_bounds(rel.arg2)) {
      throw ValidationError(doc.doc_id, "relation " + rel.type + " has identical arguments");
    }
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& cluster : doc.clusters) {
    if (cluster.size() < 2) throw ValidationError(doc.doc_id, "cluster with fewer than 2 members");
    for (const auto& m : cluster) {
      check_bounds(doc, m, n, "cluster");
      if (!seen.insert({m.start, m.end}).second) {
        throw ValidationError(doc.doc_id, "span " + describe(m) + " appears in two clusters");
      }
    }
  }
}

void normalize_clusters(Document& doc) {
  std::vector<Cluster> kept;
  for (auto& c : doc.clusters) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    if (c.size() >= 2) kept.push_back(std::move(c));
  }
  doc.clusters = std::move(kept);
}

namespace {

TaggedSpan parse_bounds(const json& j, int line, const char* what) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ParseError(std::string("malformed ") + what + " span", line);
  }
  TaggedSpan s;
  s.start = j[0].get<int>();
  s.end = j[1].get<int>();
  return s;
}

std::vector<TaggedSpan> parse_labeled(const json& record, const char* key, int line) {
  std::vector<TaggedSpan> out;
  if (!record.contains(key)) return out;
  const json& arr = record.at(key);
  if (!arr.is_array()) throw ParseError(std::string("'") + key + "' must be an array", line);
  for (const json& item : arr) {
    TaggedSpan s = parse_bounds(item, line, key);
    if (item.size() < 3 || !item[2].is_string()) {
      throw ParseError(std::string("'") + key + "' span needs a string label", line);
    }
    s.label = item[2].get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Document parse_jsonl_record(const std::string& text, int line) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }
  if (!record.is_object()) throw ParseError("record is not a JSON object", line);

  Document doc;
  try {
    doc.doc_id = record.value("doc_id", std::string());
    if (!record.contains("sentences") || !record["sentences"].is_array()) {
      throw ParseError("missing 'sentences' array", line);
    }
    for (const json& sent : record["sentences"]) {
      std::vector<std::string> tokens;
      for (const json& tok : sent) tokens.push_back(tok.get<std::string>());
      doc.sentences.push_back(std::move(tokens));
    }
    doc.ner_spans = parse_labeled(record, "ner", line);
    doc.emd_spans = parse_labeled(record, "mentions", line);
    if (record.contains("relations")) {
      for (const json& r : record["relations"]) {
        RelationInstance rel;
        rel.type = r.at("type").get<std::string>();
        rel.arg1 = parse_bounds(r.at("arg1"), line, "arg1");
        rel.arg2 = parse_bounds(r.at("arg2"), line, "arg2");
        for (TaggedSpan* arg : {&rel.arg1, &rel.arg2}) {
          for (const auto& m : doc.emd_spans) {
            if (m.same_bounds(*arg)) arg->label = m.label;
          }
        }
        doc.relations.push_back(std::move(rel));
      }
    }
    if (record.contains("clusters")) {
      for (const json& c : record["clusters"]) {
        Cluster cluster;
        for (const json& m : c) cluster.push_back(parse_bounds(m, line, "cluster"));
        doc.clusters.push_back(std::move(cluster));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line);
  }
  normalize_clusters(doc);
  return doc;
}

std::string to_jsonl_record(const Document& doc) {
  json record;
  record["doc_id"] = doc.doc_id;
  record["sentences"] = doc.sentences;
  auto labeled = [](const std::vector<TaggedSpan>& spans) {
    json arr = json::array();
    for (const auto& s : spans) arr.push_back(json::array({s.start, s.end, s.label}));
    return arr;
  };
  record["ner"] = labeled(doc.ner_spans);
  record["mentions"] = labeled(doc.emd_spans);
  json rels = json::array();
  for (const auto& r : doc.relations) {
    json jr;
    jr["type"] = r.type;
    jr["arg1"] = json::array({r.arg1.start, r.arg1.end});
    jr["arg2"] = json::array({r.arg2.start, r.arg2.end});
    rels.push_back(std::move(jr));
  }
  record["relations"] = std::move(rels);
  json clusters = json::array();
  for (const auto& c : doc.clusters) {
    json jc = json::array();
    for (const auto& m : c) jc.push_back(json::array({m.start, m.end}));
    clusters.push_back(std::move(jc));
  }
  record["clusters"] = std::move(clusters);
  return record.dump();
}

std::vector<Document> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Document> docs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document doc = parse_jsonl_record(line, lineno);
    validate(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& doc : docs) out << to_jsonl_record(doc) << "\n";
}

DocumentSplit split_documents(const std::vector<Document>& docs, SplitRatios ratios,
                              std::uint64_t seed) {
  const double total = ratios.train + ratios.dev + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train < 0 || ratios.dev < 0 || ratios.test < 0) {
    throw ConfigError("data.split", "split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = docs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_train = std::min(n, static_cast<std::size_t>(std::llround(ratios.train * n)));
  std::size_t n_dev =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.dev * n)));
  if (ratios.test == 0.0) n_dev = n - n_train;

  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(from),
                                 order.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(idx.begin(), idx.end());
    std::vector<Document> out;
    for (std::size_t i : idx) out.push_back(docs[i]);
    return out;
  };
  DocumentSplit split;
  split.train = take(0, n_train);
  split.dev = take(n_train, n_dev);
  split.test = take(n_train + n_dev, n - n_train - n_dev);
  return split;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

void DatasetRegistry::add(DatasetHandle handle) {
  if (handle.sentences == 0) {
    throw ConfigError("data." + std::string(task_name(handle.task)) + "." +
                          std::string(split_name(handle.split)),
                      "dataset '" + handle.name + "' is empty");
  }
  if (handle.split == Split::kTrain && has_training(handle.task)) {
    throw ConfigError("data." + std::string(task_name(handle.task)),
                      "task already has a training dataset");
  }
  handles_.push_back(std::move(handle));
}

bool DatasetRegistry::has_training(Task task) const {
  return std::any_of(handles_.begin(), handles_.end(), [&](const DatasetHandle& h) {
    return h.task == task && h.split == Split::kTrain;
  });
}

const DatasetHandle& DatasetRegistry::training(Task task) const {
  for (const auto& h : handles_) {
    if (h.task == task && h.split == Split::kTrain) return h;
  }
  throw ConfigError("data." + std::string(task_name(task)), "no training dataset registered");
}

std::map<Task, std::size_t> DatasetRegistry::training_sizes() const {
  std::map<Task, std::size_t> sizes;
  for (const auto& h : handles_) {
    if (h.split == Split::kTrain) sizes[h.task] = h.sentences;
  }
  return sizes;
}

std::size_t count_sentences(const std::vector<Document>& docs) {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.sentences.size();
  return n;
}

}  // namespace hmtl
