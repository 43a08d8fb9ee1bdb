#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/relation.hpp"
#include "hmtl/task.hpp"

namespace hmtl {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0 for zero denominators; f1 is 0 when P + R is 0.
PRF make_prf(double p_num, double p_den, double r_num, double r_den);

// Micro-averaging accumulator for span and relation scoring.
struct MatchCounts {
  long correct = 0;
  long predicted = 0;
  long gold = 0;

  MatchCounts& operator+=(const MatchCounts& o);
  PRF prf() const;
};

// Exact (start, end, label) matches, one to one.
MatchCounts span_counts(const std::vector<TaggedSpan>& pred, const std::vector<TaggedSpan>& gold);
PRF span_f1(const std::vector<TaggedSpan>& pred, const std::vector<TaggedSpan>& gold);

struct RelationKey {
  std::string type;
  int arg1_last = 0;
  int arg2_last = 0;
  auto operator<=>(const RelationKey&) const = default;
};
RelationKey relation_key(const RelationInstance& r);
RelationKey relation_key(const RelationPrediction& r);

MatchCounts relation_counts(const std::vector<RelationKey>& pred, const std::vector<RelationKey>& gold);
PRF relation_f1(const std::vector<RelationKey>& pred, const std::vector<RelationKey>& gold);

// Numerators and denominators of one coreference metric; summing over
// documents gives the corpus-level score.
struct MetricParts {
  double p_num = 0.0;
  double p_den = 0.0;
  double r_num = 0.0;
  double r_den = 0.0;

  MetricParts& operator+=(const MetricParts& o);
  PRF prf() const { return make_prf(p_num, p_den, r_num, r_den); }
};

// Clusters compare members by bounds only.
MetricParts muc_parts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
MetricParts b_cubed_parts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
MetricParts ceaf_e_parts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
PRF muc(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
PRF b_cubed(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
PRF ceaf_e(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);

double phi4(const Cluster& a, const Cluster& b);

// Maximum-weight one-to-one assignment between rows and columns of a
// rectangular matrix. Returns the column of each row, or -1.
std::vector<int> max_weight_assignment(const Matrix& weights);

struct CorefReport {
  PRF muc;
  PRF b_cubed;
  PRF ceaf_e;
  double average_f1 = 0.0;
};

struct CorefCounts {
  MetricParts muc;
  MetricParts b_cubed;
  MetricParts ceaf_e;

  CorefCounts& operator+=(const CorefCounts& o);
  CorefReport report() const;
};

CorefCounts coref_counts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);
CorefReport coref_report(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold);

// Gold-mention scoring: drops predicted members that are not gold mentions,
// then clusters left with fewer than two members.
std::vector<Cluster> restrict_to_mentions(const std::vector<Cluster>& pred,
                                          const std::vector<Cluster>& gold);

// Per-task scores in the layout P / R / F1 per task and MUC / B3 / CEAFe /
// average for coreference.
struct MetricReport {
  std::map<Task, PRF> spans;  // ner, emd, re
  std::optional<CorefReport> coref;
  bool gold_mentions = false;

  bool has(Task task) const;
  // Span or relation F1; the CoNLL average for coreference.
  double primary_f1(Task task) const;
  std::string to_json() const;
  std::string to_text() const;
};

}  // namespace hmtl
