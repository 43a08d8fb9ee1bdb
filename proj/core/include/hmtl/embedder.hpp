#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmtl/autograd.hpp"

namespace hmtl {

// Token (or character) inventory with reserved PAD and UNK entries.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& entries);

  // Returns the index of `token`, adding it if needed.
  int add(const std::string& token);
  // Exact match only; -1 if absent.
  int exact(std::string_view token) const;
  // Exact match, then lowercased match, then UNK.
  int lookup(std::string_view token) const;

  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<std::string>& entries() const { return entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, int> index_;
};

std::string to_lower_ascii(std::string_view s);
// Splits UTF-8 text into code points (invalid bytes become single units).
std::vector<std::string> utf8_chars(std::string_view word);

// Pretrained vectors: PAD is zero, UNK is the mean of the loaded rows.
struct WordTable {
  Vocabulary vocab;
  Matrix vectors;  // vocab.size() x dim
  bool trainable = true;
};

WordTable load_word_vectors(const std::filesystem::path& path, int expected_dim);

struct SentenceContext {
  std::string_view doc_id;
  int doc_offset = 0;  // document index of tokens[0]
  std::span<const std::string> tokens;
};

// Maps a whole sentence to per-token vectors of a fixed width. Frozen.
class ContextualEmbedder {
 public:
  virtual ~ContextualEmbedder() = default;
  virtual int dim() const = 0;
  virtual Matrix embed(const SentenceContext& sentence) const = 0;
  virtual std::string kind() const = 0;
};

// Deterministic stand-in for a pretrained language model: every
// (token, position, sentence length) triple hashes to `dim` values in [-1, 1].
class HashContextualEmbedder final : public ContextualEmbedder {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed'c0de'1234'abcdULL;

  explicit HashContextualEmbedder(int dim, std::uint64_t seed = kDefaultSeed)
      : dim_(dim), seed_(seed) {}
  int dim() const override { return dim_; }
  Matrix embed(const SentenceContext& sentence) const override;
  std::string kind() const override { return "hash"; }

 private:
  int dim_;
  std::uint64_t seed_;
};

class ZeroContextualEmbedder final : public ContextualEmbedder {
 public:
  explicit ZeroContextualEmbedder(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  Matrix embed(const SentenceContext& sentence) const override {
    return Matrix::Zero(static_cast<int>(sentence.tokens.size()), dim_);
  }
  std::string kind() const override { return "zero"; }

 private:
  int dim_;
};

// Precomputed vectors keyed by (doc_id, document token index). File lines
// are "doc_id<TAB>token_index<TAB>v1 v2 ... v_dim".
class FileContextualEmbedder final : public ContextualEmbedder {
 public:
  FileContextualEmbedder(const std::filesystem::path& path, int dim);
  int dim() const override { return dim_; }
  Matrix embed(const SentenceContext& sentence) const override;
  std::string kind() const override { return "file"; }

 private:
  int dim_;
  std::unordered_map<std::string, Vector> vectors_;
};

// Character CNN: embeds characters, convolves each filter bank over the
// padded word and max-pools over positions.
class CharCNN {
 public:
  struct Options {
    int char_dim = 16;
    std::vector<int> widths = {2, 3};
    int filters_per_width = 25;
  };

  static CharCNN create(ParameterStore& store, const std::string& prefix, Vocabulary chars,
                        const Options& options, Rng& rng);

  int output_dim() const;
  int max_width() const;
  const Vocabulary& chars() const { return chars_; }
  const Options& options() const { return options_; }

  // Character ids, right-padded with PAD up to max_width().
  std::vector<int> char_ids(std::string_view word) const;

  Var forward(Tape& tape, std::span<const std::string> words) const;

  Parameter& char_embeddings() const { return *char_emb_; }
  Parameter& filter_weights(std::size_t bank) const { return *banks_[bank].weight; }
  Parameter& filter_bias(std::size_t bank) const { return *banks_[bank].bias; }

 private:
  struct Bank {
    int width;
    Parameter* weight;  // filters x (width * char_dim)
    Parameter* bias;    // 1 x filters
  };
  Vocabulary chars_;
  Options options_;
  Parameter* char_emb_ = nullptr;
  std::vector<Bank> banks_;
};

// One coordinate per filter: max over positions of (filter . window + bias).
Vector char_features(std::string_view word, const CharCNN& cnn);

// Produces g_e = [word ; char ; contextual] per token. Any part can be
// switched off for ablations, but not all of them.
class Embedder {
 public:
  struct Options {
    bool use_word = true;
    bool use_char = true;
    bool use_contextual = true;
  };

  Embedder() = default;
  Embedder(Vocabulary words, Parameter* word_table, std::optional<CharCNN> cnn,
           std::shared_ptr<const ContextualEmbedder> contextual, Options options);

  int output_dim() const;
  int word_dim() const;
  int char_dim() const;
  int contextual_dim() const;
  const Options& options() const { return options_; }
  const Vocabulary& words() const { return words_; }
  const CharCNN* cnn() const { return cnn_ ? &*cnn_ : nullptr; }
  const ContextualEmbedder* contextual() const { return contextual_.get(); }

  Var embed(Tape& tape, const SentenceContext& sentence) const;

 private:
  Vocabulary words_;
  Parameter* word_table_ = nullptr;
  std::optional<CharCNN> cnn_;
  std::shared_ptr<const ContextualEmbedder> contextual_;
  Options options_;
};

// Gradient-free convenience wrapper around Embedder::embed.
Matrix embed_sentence(const SentenceContext& sentence, const Embedder& embedder);

}  // namespace hmtl
