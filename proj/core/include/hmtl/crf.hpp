#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/corpus.hpp"

namespace hmtl {

// BILOU tags over a label set. Index 0 is O; label k owns indices
// 1 + 4k + {0: B, 1: I, 2: L, 3: U}.
class BilouTagset {
 public:
  enum class Prefix { kO, kB, kI, kL, kU };
  static constexpr int kOutside = 0;

  BilouTagset() = default;
  explicit BilouTagset(std::vector<std::string> labels);

  int size() const { return 4 * static_cast<int>(labels_.size()) + 1; }
  const std::vector<std::string>& labels() const { return labels_; }

  int tag(Prefix prefix, std::string_view label) const;
  Prefix prefix(int tag) const;
  // Index into labels(); -1 for O.
  int label_index(int tag) const;
  const std::string& label(int tag) const;
  std::string tag_name(int tag) const;
  int parse(std::string_view name) const;

  bool allowed_start(int tag) const;
  bool allowed_end(int tag) const;
  bool allowed_transition(int from, int to) const;

 private:
  std::vector<std::string> labels_;
};

// Sentence-relative spans to tags. Throws std::invalid_argument on overlap,
// out-of-range spans or unknown labels.
std::vector<int> spans_to_tags(const std::vector<TaggedSpan>& spans, int n,
                               const BilouTagset& tagset);

// Total decoder: invalid sequences are repaired. An orphan I opens a span, an
// orphan L becomes a unit span, B/U/O close any open span at the previous
// token, and labels inside an open span follow the span-initial label.
std::vector<TaggedSpan> tags_to_spans(std::span<const int> tags, const BilouTagset& tagset);

struct CrfWeights {
  Matrix transitions;  // from x to
  RowVector start;
  RowVector stop;
};

double log_partition(const Matrix& emissions, const CrfWeights& w);
double sequence_score(const Matrix& emissions, const CrfWeights& w, std::span<const int> tags);
double crf_nll(const Matrix& emissions, const CrfWeights& w, std::span<const int> gold);
// Highest-scoring sequence; ties go to the lowest tag index.
std::vector<int> viterbi(const Matrix& emissions, const CrfWeights& w);

struct CrfGradient {
  double nll = 0.0;
  Matrix emissions;
  Matrix transitions;
  RowVector start;
  RowVector stop;
};

// Forward-backward: gradient of crf_nll w.r.t. every input.
CrfGradient crf_nll_gradient(const Matrix& emissions, const CrfWeights& w,
                             std::span<const int> gold);

// Score assigned to BILOU-invalid moves by constrained decoding.
inline constexpr double kForbiddenScore = -1e6;
CrfWeights mask_invalid(const CrfWeights& w, const BilouTagset& tagset);

// Emission projection plus transition parameters for one tagging task.
class CrfHead {
 public:
  static CrfHead create(ParameterStore& store, const std::string& prefix, Group group,
                        int input_dim, BilouTagset tagset, Rng& rng);

  const BilouTagset& tagset() const { return tagset_; }
  CrfWeights weights() const;

  Var emissions(Tape& tape, Var features) const;
  Var nll(Tape& tape, Var emissions, std::vector<int> gold) const;
  std::vector<int> decode(const Matrix& emissions, bool constrained) const;

 private:
  BilouTagset tagset_;
  Parameter* proj_weight_ = nullptr;
  Parameter* proj_bias_ = nullptr;
  Parameter* transitions_ = nullptr;
  Parameter* start_ = nullptr;
  Parameter* stop_ = nullptr;
};

}  // namespace hmtl
