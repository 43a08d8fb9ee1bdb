#include <fstream>
#include <optional>
#include <sstream>

#include "hmtl/corpus.hpp"
#include "hmtl/error.hpp"
#include "hmtl/logging.hpp"

namespace hmtl {
namespace {

struct OpenSpan {
  int start;
  std::string label;
};

class SentenceDecoder {
 public:
  SentenceDecoder(int offset, std::vector<TaggedSpan>& out, ConllStats& stats)
      : offset_(offset), out_(out), stats_(stats) {}

  void push(const std::string& tag, int line) {
    const int t = offset_ + position_++;
    if (tag == "O") {
      close(t - 1);
      return;
    }
    if (tag.size() < 3 || tag[1] != '-') throw ParseError("unknown tag '" + tag + "'", line);
    const char prefix = tag[0];
    std::string label = tag.substr(2);
    switch (prefix) {
      case 'B':
        close(t - 1);
        open_ = OpenSpan{t, std::move(label)};
        break;
      case 'I':
        if (!open_ || open_->label != label) {
          close(t - 1);
          ++stats_.repairs;
          open_ = OpenSpan{t, std::move(label)};
        }
        break;
      case 'L':
      case 'E':
        if (open_ && open_->label == label) {
          close(t);
        } else {
          close(t - 1);
          ++stats_.repairs;
          emit(t, t, std::move(label));
        }
        break;
      case 'U':
      case 'S':
        close(t - 1);
        emit(t, t, std::move(label));
        break;
      default:
        throw ParseError("unknown tag prefix in '" + tag + "'", line);
    }
  }

  void finish() { close(offset_ + position_ - 1); }

 private:
  void close(int end) {
    if (!open_) return;
    emit(open_->start, end, std::move(open_->label));
    open_.reset();
  }
  void emit(int start, int end, std::string label) {
    out_.push_back(TaggedSpan{start, end, std::move(label)});
    ++stats_.spans;
  }

  int offset_;
  int position_ = 0;
  std::optional<OpenSpan> open_;
  std::vector<TaggedSpan>& out_;
  ConllStats& stats_;
};

}  // namespace

std::vector<Document> load_conll_ner(const std::filesystem::path& path, ConllStats* stats_out) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());

  ConllStats stats;
  std::vector<Document> docs;
  bool saw_docstart = false;
  Document current;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::vector<int> tag_lines;
  const std::string stem = path.filename().string();

  auto flush_sentence = [&]() {
    if (tokens.empty()) return;
    const int offset = current.token_count();
    SentenceDecoder dec(offset, current.ner_spans, stats);
    for (std::size_t i = 0; i < tags.size(); ++i) dec.push(tags[i], tag_lines[i]);
    dec.finish();
    current.sentences.push_back(std::move(tokens));
    tokens.clear();
    tags.clear();
    tag_lines.clear();
    ++stats.sentences;
    if (!saw_docstart) {
      current.doc_id = stem + ":" + std::to_string(docs.size());
      docs.push_back(std::move(current));
      current = Document{};
    }
  };
  auto flush_document = [&]() {
    flush_sentence();
    if (!current.sentences.empty()) {
      current.doc_id = stem + ":" + std::to_string(docs.size());
      docs.push_back(std::move(current));
    }
    current = Document{};
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(f);
    if (cols.empty()) {
      flush_sentence();
      continue;
    }
    if (cols[0] == "-DOCSTART-") {
      if (!saw_docstart) {
        flush_sentence();
        saw_docstart = true;
      }
      flush_document();
      continue;
    }
    if (cols.size() < 2) throw ParseError("expected at least two columns", lineno);
    tokens.push_back(cols.front());
    tags.push_back(cols.back());
    tag_lines.push_back(lineno);
  }
  flush_document();

  for (auto& d : docs) validate(d);
  if (stats.repairs > 0) {
    log_warning() << path.string() << ": repaired " << stats.repairs << " inconsistent tag(s)";
  }
  if (stats_out != nullptr) *stats_out = stats;
  return docs;
}

}  // namespace hmtl
