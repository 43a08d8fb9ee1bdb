#pragma once

#include <cstdint>
#include <vector>

#include "hmtl/corpus.hpp"

namespace hmtl {

// Probabilities of the optional sentence templates that follow the opening
// "<person> works for <company> ." sentence of every synthetic document.
struct SyntheticConfig {
  double p_meeting = 0.8;    // "<person B> met <surname A> in <city> ."
  double p_location = 0.8;   // "The company is based in <city> ."
  double p_residence = 0.8;  // "<pronoun A> lives in <city> ."
  double p_hiring = 0.7;     // "<pronoun B> joined the company ." (needs a meeting)
};

// Relation types emitted by the generator (a subset of the ACE05 set).
const std::vector<std::string>& synthetic_relation_types();

// Templated documents whose NER spans, mention heads, relations and coref
// chains are jointly consistent. A pure function of its arguments.
std::vector<Document> generate_synthetic_corpus(std::uint64_t seed, int n_docs,
                                                const SyntheticConfig& config = {});

}  // namespace hmtl
