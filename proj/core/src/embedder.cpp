#include "hmtl/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hmtl/error.hpp"
#include "hmtl/logging.hpp"

namespace hmtl {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(const std::vector<std::string>& entries) {
  for (const auto& e : entries) add(e);
  if (exact("<pad>") != kPad || exact("<unk>") != kUnk) {
    throw ParseError("vocabulary must start with <pad> and <unk>");
  }
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, static_cast<int>(entries_.size()));
  if (inserted) entries_.push_back(token);
  return it->second;
}

int Vocabulary::exact(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

int Vocabulary::lookup(std::string_view token) const {
  if (int i = exact(token); i >= 0) return i;
  if (int i = exact(to_lower_ascii(token)); i >= 0) return i;
  return kUnk;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((lead & 0xE0) == 0xC0) len = 2;
    else if ((lead & 0xF0) == 0xE0) len = 3;
    else if ((lead & 0xF8) == 0xF0) len = 4;
    if (i + len > word.size()) len = 1;
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

WordTable load_word_vectors(const std::filesystem::path& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  WordTable table;
  std::vector<Vector> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    for (std::string v; fields >> v;) {
      try {
        values.push_back(std::stod(v));
      } catch (const std::exception&) {
        throw ParseError("non-numeric value '" + v + "'", lineno);
      }
    }
    if (static_cast<int>(values.size()) != expected_dim) {
      throw ParseError("expected " + std::to_string(expected_dim) + " values, found " +
                           std::to_string(values.size()),
                       lineno);
    }
    if (table.vocab.exact(token) >= 0) {
      log_warning() << path.string() << ":" << lineno << ": duplicate token '" << token
                    << "' ignored";
      continue;
    }
    table.vocab.add(token);
    rows.push_back(Eigen::Map<const Vector>(values.data(), expected_dim));
  }

  table.vectors = Matrix::Zero(table.vocab.size(), expected_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.vectors.row(static_cast<int>(i) + 2) = rows[i].transpose();
  }
  if (rows.empty()) {
    log_warning() << path.string() << ": no word vectors loaded";
  } else {
    table.vectors.row(Vocabulary::kUnk) =
        table.vectors.bottomRows(static_cast<int>(rows.size())).colwise().mean();
  }
  return table;
}

// ---------------------------------------------------------------------------
// Contextual embedders

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string cache_key(std::string_view doc_id, int index) {
  return std::string(doc_id) + '\t' + std::to_string(index);
}

}  // namespace

Matrix HashContextualEmbedder::embed(const SentenceContext& sentence) const {
  const int n = static_cast<int>(sentence.tokens.size());
  Matrix out(n, dim_);
  for (int i = 0; i < n; ++i) {
    std::uint64_t state = seed_ ^ fnv1a(sentence.tokens[static_cast<std::size_t>(i)]);
    state ^= 0x632BE59BD9B4E019ULL * static_cast<std::uint64_t>(i + 1);
    state ^= 0x85157AF5ULL * static_cast<std::uint64_t>(n);
    for (int k = 0; k < dim_; ++k) {
      const double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      out(i, k) = 2.0 * unit - 1.0;
    }
  }
  return out;
}

FileContextualEmbedder::FileContextualEmbedder(const std::filesystem::path& path, int dim)
    : dim_(dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw ParseError("expected three tab-separated fields", lineno);
    int index = 0;
    try {
      index = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
    } catch (const std::exception&) {
      throw ParseError("bad token index", lineno);
    }
    std::istringstream values(line.substr(tab2 + 1));
    Vector v(dim);
    int k = 0;
    for (double x; values >> x; ++k) {
      if (k >= dim) break;
      v(k) = x;
    }
    if (k != dim || !values.eof()) {
      throw ParseError("expected " + std::to_string(dim) + " values", lineno);
    }
    vectors_[cache_key(line.substr(0, tab1), index)] = std::move(v);
  }
}

Matrix FileContextualEmbedder::embed(const SentenceContext& sentence) const {
  const int n = static_cast<int>(sentence.tokens.size());
  Matrix out(n, dim_);
  for (int i = 0; i < n; ++i) {
    auto it = vectors_.find(cache_key(sentence.doc_id, sentence.doc_offset + i));
    if (it == vectors_.end()) {
      throw std::runtime_error("no contextual vector for document '" +
                               std::string(sentence.doc_id) + "' token " +
                               std::to_string(sentence.doc_offset + i));
    }
    out.row(i) = it->second.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Character CNN

CharCNN CharCNN::create(ParameterStore& store, const std::string& prefix, Vocabulary chars,
                        const Options& options, Rng& rng) {
  if (options.widths.empty() || options.filters_per_width <= 0) {
    throw ConfigError("embed.char_widths", "the character CNN needs at least one filter");
  }
  CharCNN cnn;
  cnn.chars_ = std::move(chars);
  cnn.options_ = options;
  Matrix emb = uniform_matrix(cnn.chars_.size(), options.char_dim, 0.5, rng);
  cnn.char_emb_ = &store.add(prefix + ".char_embeddings", Group::kEmbeddings, std::move(emb),
                             /*row_sparse=*/true);
  for (int w : options.widths) {
    if (w <= 0) throw ConfigError("embed.char_widths", "filter widths must be positive");
    Bank bank;
    bank.width = w;
    bank.weight = &store.add(prefix + ".conv" + std::to_string(w) + ".weight", Group::kEmbeddings,
                             glorot_matrix(options.filters_per_width, w * options.char_dim, rng));
    bank.bias = &store.add(prefix + ".conv" + std::to_string(w) + ".bias", Group::kEmbeddings,
                           Matrix::Zero(1, options.filters_per_width));
    cnn.banks_.push_back(bank);
  }
  return cnn;
}

int CharCNN::output_dim() const {
  int n = 0;
  for (const auto& b : banks_) n += static_cast<int>(b.weight->value.rows());
  return n;
}

int CharCNN::max_width() const {
  int w = 0;
  for (const auto& b : banks_) w = std::max(w, b.width);
  return w;
}

std::vector<int> CharCNN::char_ids(std::string_view word) const {
  std::vector<int> ids;
  for (const auto& c : utf8_chars(word)) {
    int i = chars_.exact(c);
    ids.push_back(i >= 0 ? i : Vocabulary::kUnk);
  }
  while (static_cast<int>(ids.size()) < max_width()) ids.push_back(Vocabulary::kPad);
  return ids;
}

namespace {

// Stacks the windows of one filter bank: row p is [E[ids[p]] ... E[ids[p+w-1]]].
Matrix windows(const Matrix& emb, const std::vector<int>& ids, int width) {
  const int dc = static_cast<int>(emb.cols());
  const int positions = static_cast<int>(ids.size()) - width + 1;
  Matrix out(positions, width * dc);
  for (int p = 0; p < positions; ++p) {
    for (int q = 0; q < width; ++q) out.block(p, q * dc, 1, dc) = emb.row(ids[p + q]);
  }
  return out;
}

}  // namespace

Var CharCNN::forward(Tape& tape, std::span<const std::string> words) const {
  const int n = static_cast<int>(words.size());
  const int out_dim = output_dim();
  const Matrix& emb = char_emb_->value;
  Matrix out(n, out_dim);

  struct WordCache {
    std::vector<int> ids;
    std::vector<std::vector<int>> argmax;  // per bank, per filter
  };
  std::vector<WordCache> cache(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    auto& wc = cache[static_cast<std::size_t>(i)];
    wc.ids = char_ids(words[static_cast<std::size_t>(i)]);
    int col = 0;
    for (const auto& bank : banks_) {
      Matrix win = windows(emb, wc.ids, bank.width);
      Matrix scores = win * bank.weight->value.transpose();
      scores.rowwise() += bank.bias->value.row(0);
      const int filters = static_cast<int>(scores.cols());
      std::vector<int> arg(static_cast<std::size_t>(filters));
      for (int f = 0; f < filters; ++f) {
        Eigen::Index best = 0;
        scores.col(f).maxCoeff(&best);
        arg[static_cast<std::size_t>(f)] = static_cast<int>(best);
        out(i, col + f) = scores(best, f);
      }
      wc.argmax.push_back(std::move(arg));
      col += filters;
    }
  }

  const bool need = char_emb_->trainable;
  const CharCNN* self = this;
  return tape.record_with_params(
      std::move(out), {}, need, [self, cache = std::move(cache)](Tape&, const Matrix& g) {
        Parameter& E = *self->char_emb_;
        const int dc = static_cast<int>(E.value.cols());
        for (std::size_t i = 0; i < cache.size(); ++i) {
          const auto& wc = cache[i];
          int col = 0;
          for (std::size_t b = 0; b < self->banks_.size(); ++b) {
            const Bank& bank = self->banks_[b];
            const Matrix& F = bank.weight->value;
            for (int f = 0; f < F.rows(); ++f) {
              const double gv = g(static_cast<int>(i), col + f);
              if (gv == 0.0) continue;
              const int p = wc.argmax[b][static_cast<std::size_t>(f)];
              for (int q = 0; q < bank.width; ++q) {
                const int c = wc.ids[static_cast<std::size_t>(p + q)];
                bank.weight->grad.block(f, q * dc, 1, dc) += gv * E.value.row(c);
                E.grad.row(c) += gv * F.block(f, q * dc, 1, dc);
                E.mark_row(c);
              }
              bank.bias->grad(0, f) += gv;
            }
            touch(*bank.weight);
            touch(*bank.bias);
            col += static_cast<int>(F.rows());
          }
        }
      });
}

Vector char_features(std::string_view word, const CharCNN& cnn) {
  Tape tape(false);
  std::string w(word);
  Var out = cnn.forward(tape, std::span<const std::string>(&w, 1));
  return tape.value(out).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Embedder

Embedder::Embedder(Vocabulary words, Parameter* word_table, std::optional<CharCNN> cnn,
                   std::shared_ptr<const ContextualEmbedder> contextual, Options options)
    : words_(std::move(words)),
      word_table_(word_table),
      cnn_(std::move(cnn)),
      contextual_(std::move(contextual)),
      options_(options) {
  if (!options_.use_word && !options_.use_char && !options_.use_contextual) {
    throw ConfigError("embed", "at least one of word, char, contextual embeddings must be on");
  }
  if (options_.use_word && word_table_ == nullptr) throw ConfigError("embed.word", "missing table");
  if (options_.use_char && !cnn_) throw ConfigError("embed.char", "missing character CNN");
  if (options_.use_contextual && !contextual_) {
    throw ConfigError("embed.contextual", "missing contextual embedder");
  }
  if (word_table_ != nullptr && word_table_->value.rows() != words_.size()) {
    throw DimensionError("word table rows do not match the vocabulary");
  }
}

int Embedder::word_dim() const {
  return options_.use_word ? static_cast<int>(word_table_->value.cols()) : 0;
}
int Embedder::char_dim() const { return options_.use_char ? cnn_->output_dim() : 0; }
int Embedder::contextual_dim() const { return options_.use_contextual ? contextual_->dim() : 0; }
int Embedder::output_dim() const { return word_dim() + char_dim() + contextual_dim(); }

Var Embedder::embed(Tape& tape, const SentenceContext& sentence) const {
  if (sentence.tokens.empty()) throw DimensionError("cannot embed an empty sentence");
  std::vector<Var> parts;
  if (options_.use_word) {
    std::vector<int> ids;
    ids.reserve(sentence.tokens.size());
    for (const auto& tok : sentence.tokens) ids.push_back(words_.lookup(tok));
    parts.push_back(tape.lookup(*word_table_, std::move(ids)));
  }
  if (options_.use_char) parts.push_back(cnn_->forward(tape, sentence.tokens));
  if (options_.use_contextual) parts.push_back(tape.constant(contextual_->embed(sentence)));
  return ops::concat_cols(tape, parts);
}

Matrix embed_sentence(const SentenceContext& sentence, const Embedder& embedder) {
  Tape tape(false);
  return tape.value(embedder.embed(tape, sentence));
}

}  // namespace hmtl
