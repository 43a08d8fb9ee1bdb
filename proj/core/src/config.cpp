#include "hmtl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "hmtl/error.hpp"

namespace hmtl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw ConfigError(std::string(key), "expected a number, got '" + s + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(std::string(key), "expected an integer, got '" + s + "'");
    }
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError(std::string(key), "expected a boolean, got '" + s + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define HMTL_INT_FIELD(KEY, MEMBER)                                                              \
  Field {                                                                                        \
    KEY, [](RunConfig& c, std::string_view v) { c.MEMBER = parse_number<decltype(c.MEMBER)>(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                              \
  }
#define HMTL_DOUBLE_FIELD(KEY, MEMBER)                                                         \
  Field {                                                                                      \
    KEY, [](RunConfig& c, std::string_view v) { c.MEMBER = parse_number<double>(KEY, v); },    \
        [](const RunConfig& c) { return format_double(c.MEMBER); }                             \
  }
#define HMTL_BOOL_FIELD(KEY, MEMBER)                                                           \
  Field {                                                                                      \
    KEY, [](RunConfig& c, std::string_view v) { c.MEMBER = parse_bool(KEY, v); },              \
        [](const RunConfig& c) { return std::string(c.MEMBER ? "true" : "false"); }            \
  }
#define HMTL_STRING_FIELD(KEY, MEMBER)                                                         \
  Field {                                                                                      \
    KEY, [](RunConfig& c, std::string_view v) { c.MEMBER = trim(v); },                         \
        [](const RunConfig& c) { return c.MEMBER; }                                            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      HMTL_INT_FIELD("seed", seed),
      Field{"setup",
            [](RunConfig& c, std::string_view v) {
              const std::string letter = trim(v);
              if (letter.empty()) {
                c.setup.clear();
                return;
              }
              c.model.hierarchy = setup_hierarchy(letter);
              c.model.gold_mentions = setup_uses_gold_mentions(letter);
              c.setup = letter;
            },
            [](const RunConfig& c) { return c.setup; }},
      HMTL_STRING_FIELD("model.hierarchy", model.hierarchy),
      HMTL_INT_FIELD("model.hidden", model.hidden),
      HMTL_INT_FIELD("model.layers", model.layers),
      HMTL_DOUBLE_FIELD("model.dropout", model.dropout),
      HMTL_BOOL_FIELD("model.constrained_decoding", model.constrained_decoding),
      HMTL_BOOL_FIELD("embed.word", model.embedding.use_word),
      HMTL_BOOL_FIELD("embed.char", model.embedding.use_char),
      HMTL_BOOL_FIELD("embed.contextual", model.embedding.use_contextual),
      HMTL_INT_FIELD("embed.word_dim", model.embedding.word_dim),
      HMTL_STRING_FIELD("embed.word_vectors", model.embedding.word_vectors),
      HMTL_BOOL_FIELD("embed.freeze_words", model.embedding.freeze_words),
      HMTL_INT_FIELD("embed.char_dim", model.embedding.char_dim),
      Field{"embed.char_widths",
            [](RunConfig& c, std::string_view v) {
              std::vector<int> widths;
              for (const auto& item : split_list(v)) widths.push_back(parse_number<int>("embed.char_widths", item));
              c.model.embedding.char_widths = std::move(widths);
            },
            [](const RunConfig& c) { return join(c.model.embedding.char_widths); }},
      HMTL_INT_FIELD("embed.char_filters", model.embedding.char_filters),
      HMTL_STRING_FIELD("embed.contextual_kind", model.embedding.contextual_kind),
      HMTL_INT_FIELD("embed.contextual_dim", model.embedding.contextual_dim),
      HMTL_STRING_FIELD("embed.contextual_path", model.embedding.contextual_path),
      HMTL_INT_FIELD("coref.max_width", model.coref.max_width),
      HMTL_DOUBLE_FIELD("coref.prune_ratio", model.coref.prune_ratio),
      HMTL_INT_FIELD("coref.max_antecedents", model.coref.max_antecedents),
      HMTL_INT_FIELD("coref.feature_dim", model.coref.feature_dim),
      HMTL_INT_FIELD("coref.hidden", model.coref.hidden),
      HMTL_DOUBLE_FIELD("coref.mention_loss_weight", model.coref.mention_loss_weight),
      HMTL_BOOL_FIELD("coref.gold_mentions", model.gold_mentions),
      HMTL_INT_FIELD("re.hidden", model.re_hidden),
      HMTL_DOUBLE_FIELD("re.threshold", model.re_threshold),
      HMTL_STRING_FIELD("re.types", model.re_types),
      HMTL_STRING_FIELD("trainer.sampling", trainer.sampling),
      HMTL_DOUBLE_FIELD("trainer.learning_rate", trainer.learning_rate),
      HMTL_DOUBLE_FIELD("trainer.clip_norm", trainer.clip_norm),
      HMTL_INT_FIELD("trainer.batch_size", trainer.batch_size),
      HMTL_INT_FIELD("trainer.patience", trainer.patience),
      HMTL_INT_FIELD("trainer.max_updates", trainer.max_updates),
      HMTL_INT_FIELD("trainer.eval_interval", trainer.eval_interval),
      HMTL_STRING_FIELD("trainer.checkpoint", trainer.checkpoint),
      HMTL_STRING_FIELD("data.train", data.train),
      HMTL_STRING_FIELD("data.dev", data.dev),
      HMTL_STRING_FIELD("data.test", data.test),
      HMTL_STRING_FIELD("data.corpus", data.corpus),
      HMTL_INT_FIELD("data.synthetic_docs", data.synthetic_docs),
      HMTL_INT_FIELD("data.seed", data.seed),
      Field{"data.split",
            [](RunConfig& c, std::string_view v) {
              auto parts = split_list(v);
              if (parts.size() != 3) throw ConfigError("data.split", "expected three ratios");
              c.data.split = {parse_number<double>("data.split", parts[0]),
                              parse_number<double>("data.split", parts[1]),
                              parse_number<double>("data.split", parts[2])};
            },
            [](const RunConfig& c) {
              return format_double(c.data.split.train) + "," + format_double(c.data.split.dev) + "," +
                     format_double(c.data.split.test);
            }},
      HMTL_STRING_FIELD("data.ner_train", data.ner_train),
      HMTL_STRING_FIELD("data.ner_dev", data.ner_dev),
  };
  return kFields;
}

struct Setup {
  const char* letter;
  const char* hierarchy;
  bool gold_mentions;
};

constexpr Setup kSetups[] = {
    {"A", "ner|emd|re,cr", false}, {"A-GM", "ner|emd|re,cr", true}, {"B", "ner", false},
    {"C", "emd", false},           {"D", "re", false},              {"E", "cr", false},
    {"E-GM", "cr", true},          {"F", "ner|emd", false},         {"G", "emd|re", false},
    {"H", "emd|cr", false},        {"I", "ner|emd|re", false},      {"J", "ner|emd|cr", false},
    {"K", "emd|ner", false},       {"L", "emd|ner|re,cr", false},
};

const Setup& find_setup(std::string_view letter) {
  for (const auto& s : kSetups) {
    if (letter == s.letter) return s;
  }
  throw ConfigError("setup", "unknown setup '" + std::string(letter) + "'");
}

}  // namespace

std::string setup_hierarchy(std::string_view letter) { return find_setup(letter).hierarchy; }
bool setup_uses_gold_mentions(std::string_view letter) { return find_setup(letter).gold_mentions; }

std::vector<std::string> setup_letters() {
  std::vector<std::string> out;
  for (const auto& s : kSetups) out.emplace_back(s.letter);
  return out;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  for (const auto& f : fields()) {
    if (f.key == k) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError(k, "unknown configuration key");
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(trim(assignment), "expected key=value");
  }
  apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(number) + ": expected key = value");
    }
    apply_setting(config, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_environment(RunConfig& config) {
  if (const char* seed = std::getenv("HMTL_SEED"); seed != nullptr && *seed != '\0') {
    config.seed = parse_number<std::uint64_t>("HMTL_SEED", seed);
  }
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : resolved()) out += k + " = " + v + "\n";
  return out;
}

HierarchyWiring RunConfig::wiring() const {
  try {
    HierarchyWiring w = HierarchyWiring::parse(model.hierarchy);
    w.validate();
    return w;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("model.hierarchy", e.what());
  }
}

void RunConfig::validate() const {
  HierarchyWiring w = wiring();
  if (w.tasks().empty()) throw ConfigError("model.hierarchy", "no tasks configured");
  if (model.gold_mentions && !w.has(Task::kCoref)) {
    throw ConfigError("coref.gold_mentions", "gold-mention mode needs the coreference task");
  }
  if (model.hidden < 1) throw ConfigError("model.hidden", "must be positive");
  if (model.layers < 1) throw ConfigError("model.layers", "must be positive");
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout", "must be in [0, 1)");
  const auto& e = model.embedding;
  if (!e.use_word && !e.use_char && !e.use_contextual) {
    throw ConfigError("embed.word", "at least one embedding must be enabled");
  }
  if (e.use_word && e.word_dim < 1) throw ConfigError("embed.word_dim", "must be positive");
  if (e.use_char) {
    if (e.char_widths.empty()) throw ConfigError("embed.char_widths", "at least one filter width");
    for (int wd : e.char_widths) {
      if (wd < 1) throw ConfigError("embed.char_widths", "widths must be positive");
    }
    if (e.char_filters < 1) throw ConfigError("embed.char_filters", "must be positive");
    if (e.char_dim < 1) throw ConfigError("embed.char_dim", "must be positive");
  }
  if (e.use_contextual) {
    if (e.contextual_kind != "hash" && e.contextual_kind != "zero" && e.contextual_kind != "file") {
      throw ConfigError("embed.contextual_kind", "expected hash, zero or file");
    }
    if (e.contextual_dim < 1) throw ConfigError("embed.contextual_dim", "must be positive");
    if (e.contextual_kind == "file" && e.contextual_path.empty()) {
      throw ConfigError("embed.contextual_path", "required for file contextual vectors");
    }
  }
  if (model.coref.max_width < 1) throw ConfigError("coref.max_width", "must be at least 1");
  if (!(model.coref.prune_ratio > 0.0 && model.coref.prune_ratio <= 1.0)) {
    throw ConfigError("coref.prune_ratio", "must be in (0, 1]");
  }
  if (model.coref.mention_loss_weight < 0.0) {
    throw ConfigError("coref.mention_loss_weight", "must be non-negative");
  }
  if (model.coref.max_antecedents < 1) throw ConfigError("coref.max_antecedents", "must be positive");
  if (!(model.re_threshold > 0.0 && model.re_threshold < 1.0)) {
    throw ConfigError("re.threshold", "must be in (0, 1)");
  }
  if (trainer.sampling != "proportional" && trainer.sampling != "uniform") {
    throw ConfigError("trainer.sampling", "expected proportional or uniform");
  }
  if (!(trainer.learning_rate > 0.0)) throw ConfigError("trainer.learning_rate", "must be positive");
  if (trainer.batch_size < 1) throw ConfigError("trainer.batch_size", "must be positive");
  if (trainer.patience < 0) throw ConfigError("trainer.patience", "must be non-negative");
  if (trainer.max_updates < 1) throw ConfigError("trainer.max_updates", "must be positive");
  if (trainer.eval_interval < 0) throw ConfigError("trainer.eval_interval", "must be non-negative");
  if (trainer.checkpoint != "best" && trainer.checkpoint != "final") {
    throw ConfigError("trainer.checkpoint", "expected best or final");
  }
  const bool split_source = !data.corpus.empty() || data.synthetic_docs > 0;
  if (split_source) {
    const double sum = data.split.train + data.split.dev + data.split.test;
    if (std::abs(sum - 1.0) > 1e-9 || data.split.train < 0 || data.split.dev < 0 || data.split.test < 0) {
      throw ConfigError("data.split", "ratios must be non-negative and sum to 1");
    }
  } else {
    if (data.train.empty()) throw ConfigError("data.train", "no training data configured");
    if (data.dev.empty()) throw ConfigError("data.dev", "no development data configured");
  }
}

}  // namespace hmtl
