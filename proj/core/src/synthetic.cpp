#include "hmtl/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <sstream>
#include <string_view>

#include "hmtl/autograd.hpp"

namespace hmtl {
namespace {

constexpr std::array<std::string_view, 10> kFemaleNames = {
    "Alice", "Maria", "Emma", "Sofia", "Laura", "Nina", "Clara", "Julia", "Irene", "Helen"};
constexpr std::array<std::string_view, 10> kMaleNames = {
    "John", "Peter", "David", "Mark", "Paul", "Tom", "Victor", "Henry", "Oscar", "Louis"};
constexpr std::array<std::string_view, 10> kSurnames = {
    "Smith", "Brown", "Garcia", "Miller", "Wilson", "Moore", "Clark", "Lewis", "Walker", "Young"};
constexpr std::array<std::string_view, 8> kCompanies = {
    "Acme Corp", "Globex", "Initech",    "Umbrella Group",
    "Hooli",     "Soylent", "Vandelay Industries", "Cyberdyne"};
constexpr std::array<std::string_view, 9> kCities = {
    "Paris", "Berlin", "Madrid", "Tokyo", "Boston", "Dublin", "Lisbon", "New York", "Buenos Aires"};

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <typename Array>
std::string_view pick(const Array& values, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, values.size() - 1);
  return values[dist(rng)];
}

struct Person {
  std::string first;
  std::string last;
  bool female;
  std::string pronoun() const { return female ? "She" : "He"; }
};

// Builds one document sentence by sentence, tracking offsets.
class DocBuilder {
 public:
  explicit DocBuilder(std::string doc_id) { doc_.doc_id = std::move(doc_id); }

  // Appends words and returns the document offset of the first one.
  int append(std::string_view text) {
    int at = offset_ + static_cast<int>(current_.size());
    for (auto& w : split_words(text)) current_.push_back(std::move(w));
    return at;
  }
  int append_words(const std::vector<std::string>& words) {
    int at = offset_ + static_cast<int>(current_.size());
    current_.insert(current_.end(), words.begin(), words.end());
    return at;
  }
  void end_sentence() {
    current_.push_back(".");
    offset_ += static_cast<int>(current_.size());
    doc_.sentences.push_back(std::move(current_));
    current_.clear();
  }

  Document& doc() { return doc_; }

 private:
  Document doc_;
  std::vector<std::string> current_;
  int offset_ = 0;
};

TaggedSpan span_of(int start, std::string_view text, std::string label) {
  const int n = static_cast<int>(split_words(text).size());
  return TaggedSpan{start, start + n - 1, std::move(label)};
}

Document make_document(const std::string& doc_id, const SyntheticConfig& cfg, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  const bool a_female = coin(rng);
  Person a{std::string(pick(a_female ? kFemaleNames : kMaleNames, rng)),
           std::string(pick(kSurnames, rng)), a_female};
  Person b{std::string(pick(a_female ? kMaleNames : kFemaleNames, rng)),
           std::string(pick(kSurnames, rng)), !a_female};
  while (b.last == a.last) b.last = std::string(pick(kSurnames, rng));
  const std::string company(pick(kCompanies, rng));
  std::string city1(pick(kCities, rng));
  std::string city2(pick(kCities, rng));
  while (city2 == city1) city2 = std::string(pick(kCities, rng));

  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  const bool meeting = chance(cfg.p_meeting);
  const bool location = chance(cfg.p_location);
  const bool residence = chance(cfg.p_residence);
  const bool hiring = meeting && chance(cfg.p_hiring);

  enum Template { kMeeting, kLocation, kResidence, kHiring };
  std::vector<Template> order;
  if (meeting) order.push_back(kMeeting);
  if (location) order.push_back(kLocation);
  if (residence) order.push_back(kResidence);
  if (hiring) order.push_back(kHiring);
  std::shuffle(order.begin(), order.end(), rng);
  // A hiring sentence refers back to person B, so it must follow the meeting.
  auto meet_it = std::find(order.begin(), order.end(), kMeeting);
  auto hire_it = std::find(order.begin(), order.end(), kHiring);
  if (hire_it != order.end() && hire_it < meet_it) std::iter_swap(hire_it, meet_it);

  DocBuilder builder(doc_id);
  Document& doc = builder.doc();
  Cluster chain_a, chain_b, chain_c, chain_city2;

  const std::string a_full = a.first + " " + a.last;
  const std::string b_full = b.first + " " + b.last;

  // Opening sentence.
  int at = builder.append(a_full);
  TaggedSpan a_head = span_of(at, a_full, "PER");
  builder.append("works for");
  at = builder.append(company);
  TaggedSpan c_head = span_of(at, company, "ORG");
  builder.end_sentence();
  doc.ner_spans.push_back(a_head);
  doc.ner_spans.push_back(c_head);
  doc.emd_spans.push_back(a_head);
  doc.emd_spans.push_back(c_head);
  doc.relations.push_back({"ORG-AFF", a_head, c_head});
  chain_a.push_back({a_head.start, a_head.end, ""});
  chain_c.push_back({c_head.start, c_head.end, ""});

  TaggedSpan b_head{};
  for (Template t : order) {
    switch (t) {
      case kMeeting: {
        at = builder.append(b_full);
        b_head = span_of(at, b_full, "PER");
        builder.append("met");
        at = builder.append(a.last);
        TaggedSpan surname{at, at, "PER"};
        builder.append("in");
        at = builder.append(city1);
        TaggedSpan city = span_of(at, city1, "GPE");
        builder.end_sentence();
        for (const auto& s : {b_head, surname, city}) {
          doc.ner_spans.push_back(s);
          doc.emd_spans.push_back(s);
        }
        doc.relations.push_back({"PER-SOC", b_head, surname});
        doc.relations.push_back({"PHYS", b_head, city});
        chain_a.push_back({surname.start, surname.end, ""});
        chain_b.push_back({b_head.start, b_head.end, ""});
        break;
      }
      case kLocation: {
        at = builder.append("The company");
        TaggedSpan head{at + 1, at + 1, "ORG"};
        builder.append("is based in");
        int c_at = builder.append(city2);
        TaggedSpan city = span_of(c_at, city2, "GPE");
        builder.end_sentence();
        doc.emd_spans.push_back(head);
        doc.emd_spans.push_back(city);
        doc.ner_spans.push_back(city);
        doc.relations.push_back({"GEN-AFF", head, city});
        chain_c.push_back({at, at + 1, ""});
        chain_city2.push_back({city.start, city.end, ""});
        break;
      }
      case kResidence: {
        at = builder.append(a.pronoun());
        TaggedSpan pron{at, at, "PER"};
        builder.append("lives in");
        int c_at = builder.append(city2);
        TaggedSpan city = span_of(c_at, city2, "GPE");
        builder.end_sentence();
        doc.emd_spans.push_back(pron);
        doc.emd_spans.push_back(city);
        doc.ner_spans.push_back(city);
        doc.relations.push_back({"PHYS", pron, city});
        chain_a.push_back({pron.start, pron.end, ""});
        chain_city2.push_back({city.start, city.end, ""});
        break;
      }
      case kHiring: {
        at = builder.append(b.pronoun());
        TaggedSpan pron{at, at, "PER"};
        builder.append("joined");
        int c_at = builder.append("the company");
        TaggedSpan head{c_at + 1, c_at + 1, "ORG"};
        builder.end_sentence();
        doc.emd_spans.push_back(pron);
        doc.emd_spans.push_back(head);
        doc.relations.push_back({"ORG-AFF", pron, head});
        chain_b.push_back({pron.start, pron.end, ""});
        chain_c.push_back({c_at, c_at + 1, ""});
        break;
      }
    }
  }

  for (auto* chain : {&chain_a, &chain_b, &chain_c, &chain_city2}) {
    if (chain->size() >= 2) doc.clusters.push_back(std::move(*chain));
  }
  std::sort(doc.ner_spans.begin(), doc.ner_spans.end());
  std::sort(doc.emd_spans.begin(), doc.emd_spans.end());
  normalize_clusters(doc);
  std::sort(doc.clusters.begin(), doc.clusters.end());
  return builder.doc();
}

}  // namespace

const std::vector<std::string>& synthetic_relation_types() {
  static const std::vector<std::string> kTypes = {"GEN-AFF", "ORG-AFF", "PER-SOC", "PHYS"};
  return kTypes;
}

std::vector<Document> generate_synthetic_corpus(std::uint64_t seed, int n_docs,
                                                const SyntheticConfig& config) {
  if (n_docs <= 0) return {};
  Rng rng(seed);
  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(n_docs));
  for (int i = 0; i < n_docs; ++i) {
    docs.push_back(make_document("synth-" + std::to_string(seed) + "-" + std::to_string(i),
                                 config, rng));
    validate(docs.back());
  }
  return docs;
}

}  // namespace hmtl
