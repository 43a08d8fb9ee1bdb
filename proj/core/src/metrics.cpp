#include "hmtl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hmtl/error.hpp"

namespace hmtl {

PRF make_prf(double p_num, double p_den, double r_num, double r_den) {
  PRF out;
  out.precision = p_den > 0.0 ? p_num / p_den : 0.0;
  out.recall = r_den > 0.0 ? r_num / r_den : 0.0;
  const double s = out.precision + out.recall;
  out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
  correct += o.correct;
  predicted += o.predicted;
  gold += o.gold;
  return *this;
}

PRF MatchCounts::prf() const {
  return make_prf(static_cast<double>(correct), static_cast<double>(predicted),
                  static_cast<double>(correct), static_cast<double>(gold));
}

namespace {

template <typename T>
long multiset_matches(std::vector<T> pred, std::vector<T> gold) {
  std::sort(pred.begin(), pred.end());
  std::sort(gold.begin(), gold.end());
  long matched = 0;
  auto p = pred.begin();
  auto g = gold.begin();
  while (p != pred.end() && g != gold.end()) {
    if (*p < *g) {
      ++p;
    } else if (*g < *p) {
      ++g;
    } else {
      ++matched;
      ++p;
      ++g;
    }
  }
  return matched;
}

using Key = std::pair<int, int>;

std::vector<std::set<Key>> as_sets(const std::vector<Cluster>& clusters) {
  std::vector<std::set<Key>> out;
  for (const auto& c : clusters) {
    std::set<Key> s;
    for (const auto& m : c) s.insert({m.start, m.end});
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t overlap(const std::set<Key>& a, const std::set<Key>& b) {
  std::size_t n = 0;
  for (const auto& k : a) n += b.count(k);
  return n;
}

// Sum over `key` clusters of |k| - |partition of k by `response`|.
double muc_links(const std::vector<std::set<Key>>& key, const std::vector<std::set<Key>>& response,
                 double* denominator) {
  std::map<Key, int> owner;
  for (std::size_t i = 0; i < response.size(); ++i) {
    for (const auto& m : response[i]) owner[m] = static_cast<int>(i);
  }
  double num = 0.0, den = 0.0;
  for (const auto& k : key) {
    std::set<int> parts;
    int unowned = 0;
    for (const auto& m : k) {
      auto it = owner.find(m);
      if (it == owner.end()) {
        ++unowned;
      } else {
        parts.insert(it->second);
      }
    }
    num += static_cast<double>(k.size()) - static_cast<double>(parts.size() + static_cast<std::size_t>(unowned));
    den += static_cast<double>(k.size()) - 1.0;
  }
  *denominator = den;
  return num;
}

// Sum over mentions of `key` of |K(m) & R(m)| / |K(m)|.
double b3_sum(const std::vector<std::set<Key>>& key, const std::vector<std::set<Key>>& response,
              double* mentions) {
  std::map<Key, int> owner;
  for (std::size_t i = 0; i < response.size(); ++i) {
    for (const auto& m : response[i]) owner[m] = static_cast<int>(i);
  }
  double num = 0.0, count = 0.0;
  for (const auto& k : key) {
    for (const auto& m : k) {
      count += 1.0;
      auto it = owner.find(m);
      if (it == owner.end()) continue;
      num += static_cast<double>(overlap(k, response[static_cast<std::size_t>(it->second)])) /
             static_cast<double>(k.size());
    }
  }
  *mentions = count;
  return num;
}

}  // namespace

MatchCounts span_counts(const std::vector<TaggedSpan>& pred, const std::vector<TaggedSpan>& gold) {
  return {multiset_matches(pred, gold), static_cast<long>(pred.size()), static_cast<long>(gold.size())};
}

PRF span_f1(const std::vector<TaggedSpan>& pred, const std::vector<TaggedSpan>& gold) {
  return span_counts(pred, gold).prf();
}

RelationKey relation_key(const RelationInstance& r) { return {r.type, r.arg1.end, r.arg2.end}; }
RelationKey relation_key(const RelationPrediction& r) { return {r.type, r.arg1_last, r.arg2_last}; }

MatchCounts relation_counts(const std::vector<RelationKey>& pred, const std::vector<RelationKey>& gold) {
  return {multiset_matches(pred, gold), static_cast<long>(pred.size()), static_cast<long>(gold.size())};
}

PRF relation_f1(const std::vector<RelationKey>& pred, const std::vector<RelationKey>& gold) {
  return relation_counts(pred, gold).prf();
}

MetricParts& MetricParts::operator+=(const MetricParts& o) {
  p_num += o.p_num;
  p_den += o.p_den;
  r_num += o.r_num;
  r_den += o.r_den;
  return *this;
}

MetricParts muc_parts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  auto p = as_sets(pred);
  auto g = as_sets(gold);
  MetricParts out;
  out.r_num = muc_links(g, p, &out.r_den);
  out.p_num = muc_links(p, g, &out.p_den);
  return out;
}

MetricParts b_cubed_parts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  auto p = as_sets(pred);
  auto g = as_sets(gold);
  MetricParts out;
  out.r_num = b3_sum(g, p, &out.r_den);
  out.p_num = b3_sum(p, g, &out.p_den);
  return out;
}

double phi4(const Cluster& a, const Cluster& b) {
  auto sa = as_sets({a});
  auto sb = as_sets({b});
  const double denom = static_cast<double>(sa[0].size() + sb[0].size());
  return denom > 0.0 ? 2.0 * static_cast<double>(overlap(sa[0], sb[0])) / denom : 0.0;
}

MetricParts ceaf_e_parts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  auto p = as_sets(pred);
  auto g = as_sets(gold);
  MetricParts out;
  out.p_den = static_cast<double>(p.size());
  out.r_den = static_cast<double>(g.size());
  if (p.empty() || g.empty()) return out;
  Matrix w(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          2.0 * static_cast<double>(overlap(g[i], p[j])) / static_cast<double>(g[i].size() + p[j].size());
    }
  }
  std::vector<int> assign = max_weight_assignment(w);
  double total = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign[i] >= 0) total += w(static_cast<Eigen::Index>(i), assign[i]);
  }
  out.p_num = out.r_num = total;
  return out;
}

PRF muc(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) { return muc_parts(pred, gold).prf(); }
PRF b_cubed(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  return b_cubed_parts(pred, gold).prf();
}
PRF ceaf_e(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  return ceaf_e_parts(pred, gold).prf();
}

// Kuhn-Munkres with potentials on the padded square cost matrix.
std::vector<int> max_weight_assignment(const Matrix& weights) {
  const int rows = static_cast<int>(weights.rows());
  const int cols = static_cast<int>(weights.cols());
  const int n = std::max(rows, cols);
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  const double top = weights.size() ? weights.maxCoeff() : 0.0;
  auto cost = [&](int i, int j) {
    return (i < rows && j < cols) ? top - weights(i, j) : top;
  };
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(rows), -1);
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<std::size_t>(j)] - 1;
    if (i < rows && j - 1 < cols) out[static_cast<std::size_t>(i)] = j - 1;
  }
  return out;
}

CorefCounts& CorefCounts::operator+=(const CorefCounts& o) {
  muc += o.muc;
  b_cubed += o.b_cubed;
  ceaf_e += o.ceaf_e;
  return *this;
}

CorefReport CorefCounts::report() const {
  CorefReport r;
  r.muc = muc.prf();
  r.b_cubed = b_cubed.prf();
  r.ceaf_e = ceaf_e.prf();
  r.average_f1 = (r.muc.f1 + r.b_cubed.f1 + r.ceaf_e.f1) / 3.0;
  return r;
}

CorefCounts coref_counts(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  return {muc_parts(pred, gold), b_cubed_parts(pred, gold), ceaf_e_parts(pred, gold)};
}

CorefReport coref_report(const std::vector<Cluster>& pred, const std::vector<Cluster>& gold) {
  return coref_counts(pred, gold).report();
}

std::vector<Cluster> restrict_to_mentions(const std::vector<Cluster>& pred,
                                          const std::vector<Cluster>& gold) {
  std::set<Key> mentions;
  for (const auto& c : gold) {
    for (const auto& m : c) mentions.insert({m.start, m.end});
  }
  std::vector<Cluster> out;
  for (const auto& c : pred) {
    Cluster kept;
    for (const auto& m : c) {
      if (mentions.count({m.start, m.end})) kept.push_back(m);
    }
    if (kept.size() >= 2) out.push_back(std::move(kept));
  }
  return out;
}

// ---------------------------------------------------------------------------

bool MetricReport::has(Task task) const {
  return task == Task::kCoref ? coref.has_value() : spans.count(task) > 0;
}

double MetricReport::primary_f1(Task task) const {
  if (task == Task::kCoref) {
    if (!coref) throw std::out_of_range("no coreference scores in report");
    return coref->average_f1;
  }
  return spans.at(task).f1;
}

namespace {

nlohmann::ordered_json prf_json(const PRF& p) {
  return {{"p", p.precision}, {"r", p.recall}, {"f1", p.f1}};
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (Task t : {Task::kNer, Task::kEmd, Task::kRelation}) {
    auto it = spans.find(t);
    if (it != spans.end()) j[std::string(task_name(t))] = prf_json(it->second);
  }
  if (coref) {
    j["cr"] = {{"muc", prf_json(coref->muc)},
               {"b3", prf_json(coref->b_cubed)},
               {"ceafe", prf_json(coref->ceaf_e)},
               {"avg_f1", coref->average_f1},
               {"gold_mentions", gold_mentions}};
  }
  return j.dump(2);
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "task    P       R       F1\n";
  for (Task t : {Task::kNer, Task::kEmd, Task::kRelation}) {
    auto it = spans.find(t);
    if (it == spans.end()) continue;
    os << task_name(t) << (t == Task::kRelation ? "     " : "    ") << pct(it->second.precision) << "  "
       << pct(it->second.recall) << "  " << pct(it->second.f1) << "\n";
  }
  if (coref) {
    os << "cr" << (gold_mentions ? " (GM)" : "") << "\n";
    auto row = [&](const char* name, const PRF& p) {
      os << "  " << name << pct(p.precision) << "  " << pct(p.recall) << "  " << pct(p.f1) << "\n";
    };
    row("MUC    ", coref->muc);
    row("B3     ", coref->b_cubed);
    row("CEAFe  ", coref->ceaf_e);
    os << "  Avg F1 " << pct(coref->average_f1) << "\n";
  }
  return os.str();
}

}  // namespace hmtl
