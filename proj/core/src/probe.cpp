#include "hmtl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hmtl/error.hpp"
#include "hmtl/model.hpp"
#include "hmtl/synthetic.hpp"

namespace hmtl {

Vector sentence_embedding(const Matrix& tokens, Pooling pooling) {
  if (tokens.rows() == 0) throw DimensionError("sentence_embedding: no tokens");
  if (pooling == Pooling::kMax) return tokens.colwise().maxCoeff().transpose();
  return tokens.colwise().mean().transpose();
}

namespace {

const std::vector<ProbeLayer>& known_layers() {
  static const std::vector<ProbeLayer> kLayers = {
      {"g_emb-max", Source::kEmbeddings, Pooling::kMax}, {"g_emb-avg", Source::kEmbeddings, Pooling::kAvg},
      {"g_ner", Source::kNer, Pooling::kMax},            {"g_emd", Source::kEmd, Pooling::kMax},
      {"g_re", Source::kRelation, Pooling::kMax},        {"g_cr", Source::kCoref, Pooling::kMax},
  };
  return kLayers;
}

const std::vector<std::string>& task_order() {
  static const std::vector<std::string> kOrder = {"SentLen", "WC",     "TreeDepth", "TopConst", "BShift",
                                                  "Tense",   "SubjNum", "ObjNum",   "SOMO",     "CoordInv"};
  return kOrder;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

ProbeLayer parse_probe_layer(std::string_view name) {
  for (const auto& l : known_layers()) {
    if (l.name == name) return l;
  }
  throw ConfigError("probe.layers", "unknown layer '" + std::string(name) + "'");
}

std::vector<std::string> probe_layer_names() {
  std::vector<std::string> out;
  for (const auto& l : known_layers()) out.push_back(l.name);
  return out;
}

std::vector<std::string> ProbeTask::classes() const {
  std::set<std::string> s;
  for (const auto* split : {&train, &dev, &test}) {
    for (const auto& e : *split) s.insert(e.label);
  }
  return {s.begin(), s.end()};
}

ProbeTask load_probe_task(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("probe task '" + name + "': cannot read " + path.string());
  ProbeTask task;
  task.name = std::move(name);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError("expected split<TAB>label<TAB>sentence", number);
    const std::string split = line.substr(0, t1);
    ProbeExample ex{line.substr(t1 + 1, t2 - t1 - 1), tokenize(line.substr(t2 + 1))};
    if (ex.tokens.empty()) throw ParseError("empty sentence", number);
    if (split == "tr" || split == "train") {
      task.train.push_back(std::move(ex));
    } else if (split == "va" || split == "dev") {
      task.dev.push_back(std::move(ex));
    } else if (split == "te" || split == "test") {
      task.test.push_back(std::move(ex));
    } else {
      throw ParseError("unknown split '" + split + "'", number);
    }
  }
  return task;
}

void write_probe_task(const std::filesystem::path& path, const ProbeTask& task) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto emit = [&](const char* split, const std::vector<ProbeExample>& examples) {
    for (const auto& e : examples) {
      out << split << '\t' << e.label << '\t';
      for (std::size_t i = 0; i < e.tokens.size(); ++i) out << (i ? " " : "") << e.tokens[i];
      out << '\n';
    }
  };
  emit("tr", task.train);
  emit("va", task.dev);
  emit("te", task.test);
}

ProbeTask make_synthetic_probe(std::string_view kind, std::uint64_t seed, int sentences) {
  if (sentences < 10) throw std::invalid_argument("synthetic probes need at least 10 sentences");
  std::vector<std::vector<std::string>> pool;
  for (int docs = sentences; static_cast<int>(pool.size()) < sentences; docs *= 2) {
    pool.clear();
    for (const auto& d : generate_synthetic_corpus(seed, docs)) {
      for (const auto& s : d.sentences) pool.push_back(s);
    }
  }
  Rng rng(seed ^ 0x70be'5eedULL);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(sentences));

  ProbeTask task;
  std::vector<ProbeExample> examples;
  if (kind == "length") {
    task.name = "SentLen";
    for (auto& s : pool) examples.push_back({std::to_string(std::clamp<int>(static_cast<int>(s.size()), 4, 8)), s});
  } else if (kind == "word_content") {
    task.name = "WC";
    static const std::vector<std::string> kTargets = {"works", "met", "based", "lives", "joined"};
    for (auto& s : pool) {
      for (const auto& t : kTargets) {
        if (std::find(s.begin(), s.end(), t) != s.end()) {
          examples.push_back({t, s});
          break;
        }
      }
    }
  } else if (kind == "bigram_shift") {
    task.name = "BShift";
    std::bernoulli_distribution flip(0.5);
    for (auto& s : pool) {
      if (s.size() >= 3 && flip(rng)) {
        std::uniform_int_distribution<std::size_t> at(0, s.size() - 3);
        const std::size_t i = at(rng);
        std::swap(s[i], s[i + 1]);
        examples.push_back({"I", s});
      } else {
        examples.push_back({"O", s});
      }
    }
  } else {
    throw ConfigError("probe.synthetic", "unknown synthetic probe '" + std::string(kind) + "'");
  }
  const std::size_t n = examples.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_dev = n / 10;
  task.train.assign(examples.begin(), examples.begin() + static_cast<std::ptrdiff_t>(n_train));
  task.dev.assign(examples.begin() + static_cast<std::ptrdiff_t>(n_train),
                  examples.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  task.test.assign(examples.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), examples.end());
  return task;
}

// ---------------------------------------------------------------------------

ProbeClassifier ProbeClassifier::fit(const Matrix& x, const std::vector<int>& y, int classes,
                                     const ProbeOptions& options) {
  if (x.rows() == 0 || static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw std::invalid_argument("probe: training features and labels disagree or are empty");
  }
  if (std::set<int>(y.begin(), y.end()).size() < 2) {
    throw std::invalid_argument("probe: the training set has a single class");
  }
  ProbeClassifier c;
  const auto n = static_cast<double>(x.rows());
  c.mean_ = x.colwise().mean();
  Matrix centered = x.rowwise() - c.mean_;
  c.scale_ = (centered.array().square().colwise().sum() / n).sqrt().matrix();
  for (Eigen::Index j = 0; j < c.scale_.size(); ++j) {
    if (c.scale_(j) < 1e-12) c.scale_(j) = 1.0;
  }
  const Matrix z = centered.array().rowwise() / c.scale_.array();
  Matrix onehot = Matrix::Zero(x.rows(), classes);
  for (std::size_t i = 0; i < y.size(); ++i) onehot(static_cast<Eigen::Index>(i), y[i]) = 1.0;

  c.weights_ = Matrix::Zero(x.cols(), classes);
  c.bias_ = RowVector::Zero(classes);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Matrix logits = (z * c.weights_).rowwise() + c.bias_;
    Vector max = logits.rowwise().maxCoeff();
    Matrix p = (logits.colwise() - max).array().exp();
    p = p.array().colwise() / p.rowwise().sum().array();
    const Matrix d = (p - onehot) / n;
    c.weights_ -= options.learning_rate * (z.transpose() * d + options.l2 * c.weights_);
    c.bias_ -= options.learning_rate * d.colwise().sum();
  }
  return c;
}

std::vector<int> ProbeClassifier::predict(const Matrix& x) const {
  const Matrix z = (x.rowwise() - mean_).array().rowwise() / scale_.array();
  const Matrix logits = (z * weights_).rowwise() + bias_;
  std::vector<int> out;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

double ProbeClassifier::accuracy(const Matrix& x, const std::vector<int>& y) const {
  if (y.empty()) return 0.0;
  const auto pred = predict(x);
  long correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

ProbeResult train_probe(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& dev_x,
                        const std::vector<int>& dev_y, const Matrix& test_x, const std::vector<int>& test_y,
                        int classes, const ProbeOptions& options) {
  ProbeClassifier c = ProbeClassifier::fit(train_x, train_y, classes, options);
  return {c.accuracy(train_x, train_y), c.accuracy(dev_x, dev_y), c.accuracy(test_x, test_y)};
}

Matrix embed_examples(const HierarchicalModel& model, const std::vector<ProbeExample>& examples,
                      const ProbeLayer& layer) {
  if (layer.source != Source::kEmbeddings && !model.has(*parse_task(source_name(layer.source)))) {
    throw ConfigError("probe.layers", "layer " + layer.name + " needs a task the model does not have");
  }
  Matrix out(static_cast<Eigen::Index>(examples.size()), model.source_dim(layer.source));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Document doc;
    doc.doc_id = "probe:" + std::to_string(i);
    doc.sentences = {examples[i].tokens};
    out.row(static_cast<Eigen::Index>(i)) =
        sentence_embedding(model.representation(doc, 0, layer.source), layer.pooling).transpose();
  }
  return out;
}

ProbeGrid run_probe_suite(const HierarchicalModel& model, const std::vector<ProbeTask>& tasks,
                          const std::vector<std::string>& layers, const ProbeOptions& options) {
  std::vector<ProbeLayer> rows;
  for (const auto& name : probe_layer_names()) {
    if (std::find(layers.begin(), layers.end(), name) != layers.end()) rows.push_back(parse_probe_layer(name));
  }
  for (const auto& name : layers) parse_probe_layer(name);

  std::vector<const ProbeTask*> cols;
  for (const auto& name : task_order()) {
    for (const auto& t : tasks) {
      if (t.name == name) cols.push_back(&t);
    }
  }
  for (const auto& t : tasks) {
    if (std::find(task_order().begin(), task_order().end(), t.name) == task_order().end()) cols.push_back(&t);
  }

  ProbeGrid grid;
  for (const auto& r : rows) grid.layers.push_back(r.name);
  for (const auto* t : cols) grid.tasks.push_back(t->name);
  grid.accuracy = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const ProbeTask& task = *cols[c];
    if (task.train.empty()) throw ConfigError("probe.tasks", "probe task '" + task.name + "' has no training data");
    const auto classes = task.classes();
    auto labels = [&](const std::vector<ProbeExample>& ex) {
      std::vector<int> y;
      for (const auto& e : ex) {
        y.push_back(static_cast<int>(std::lower_bound(classes.begin(), classes.end(), e.label) - classes.begin()));
      }
      return y;
    };
    for (std::size_t r = 0; r < rows.size(); ++r) {
      ProbeResult res = train_probe(embed_examples(model, task.train, rows[r]), labels(task.train),
                                    embed_examples(model, task.dev, rows[r]), labels(task.dev),
                                    embed_examples(model, task.test, rows[r]), labels(task.test),
                                    static_cast<int>(classes.size()), options);
      grid.accuracy(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = res.test_accuracy;
    }
  }
  return grid;
}

std::string ProbeGrid::to_tsv() const {
  std::ostringstream os;
  os << "layer";
  for (const auto& t : tasks) os << '\t' << t;
  os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < layers.size(); ++r) {
    os << layers[r];
    for (std::size_t c = 0; c < tasks.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * accuracy(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      os << '\t' << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string ProbeGrid::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = layers;
  j["tasks"] = tasks;
  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < layers.size(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < tasks.size(); ++c) {
      row[tasks[c]] = accuracy(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    grid.push_back({{"layer", layers[r]}, {"accuracy", row}});
  }
  j["grid"] = grid;
  return j.dump(2);
}

}  // namespace hmtl
