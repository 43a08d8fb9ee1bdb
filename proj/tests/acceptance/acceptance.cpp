// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
//
//   acceptance [--workdir DIR] [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmtl/checkpoint.hpp"
#include "hmtl/cli.hpp"
#include "hmtl/coref.hpp"
#include "hmtl/crf.hpp"
#include "hmtl/embedder.hpp"
#include "hmtl/encoder.hpp"
#include "hmtl/metrics.hpp"
#include "hmtl/probe.hpp"
#include "hmtl/relation.hpp"
#include "hmtl/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hmtl {
namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a failed check; keeps the first few messages.
  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.str("");
    if (failures++ < 3) detail << (failures > 1 ? "; " : "") << what;
    pass = false;
  }
  int failures = 0;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Desk-scale training config shared by the experiment criteria.
std::string base_config(const std::string& setup, long max_updates) {
  std::ostringstream os;
  os << "seed = 1\n"
     << "setup = " << setup << "\n"
     << "data.synthetic_docs = 50\n"
     << "data.seed = 3\n"
     << "model.dropout = 0\n"
     << "model.hidden = 32\n"
     << "trainer.learning_rate = 0.005\n"
     << "trainer.patience = 20\n"
     << "trainer.max_updates = " << max_updates << "\n";
  return os.str();
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

int run_train(const fs::path& cfg, const fs::path& out, std::vector<std::string> sets = {}) {
  std::ostringstream sink, err;
  const int code = cli::cmd_train({cfg, std::move(sets), out}, sink, err);
  if (code != cli::kOk) std::cerr << err.str();
  return code;
}

// ---------------------------------------------------------------------------

void crf_oracle(Outcome& o) {
  const auto start = Clock::now();
  Rng rng(2024);
  std::uniform_int_distribution<int> len(1, 5), tags(1, 6);
  double worst_z = 0.0, worst_nll = 0.0, worst_v = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng), k = tags(rng);
    const Matrix e = testing::random_matrix(n, k, rng, 2.0);
    const CrfWeights w = testing::random_crf(k, rng, 2.0);
    const auto brute = testing::crf_brute_force(e, w);
    std::uniform_int_distribution<int> tag(0, k - 1);
    std::vector<int> gold(static_cast<std::size_t>(n));
    for (auto& g : gold) g = tag(rng);
    worst_z = std::max(worst_z, std::abs(log_partition(e, w) - brute.log_partition));
    worst_nll = std::max(worst_nll, std::abs(crf_nll(e, w, gold) -
                                             (brute.log_partition - testing::path_score(e, w, gold))));
    worst_v = std::max(worst_v, std::abs(testing::path_score(e, w, viterbi(e, w)) - brute.best_score));
  }
  const double secs = seconds_since(start);
  o.check(worst_z <= 1e-6, "log_partition error " + fmt(worst_z));
  o.check(worst_nll <= 1e-6, "nll error " + fmt(worst_nll));
  o.check(worst_v <= 1e-9, "viterbi score error " + fmt(worst_v));
  o.check(secs < 30.0, "took " + fmt(secs) + " s");
  o.detail << "200 instances, max errors Z=" << fmt(worst_z, 2) << " nll=" << fmt(worst_nll, 2)
           << " viterbi=" << fmt(worst_v, 2) << ", " << fmt(secs, 3) << " s";
}

void gradient_checks(Outcome& o) {
  const auto start = Clock::now();
  auto all_params = [](ParameterStore& store) {
    std::vector<Parameter*> out;
    for (std::size_t i = 0; i < store.size(); ++i) out.push_back(&store[i]);
    return out;
  };
  auto record = [&](const std::string& name, const testing::GradCheck& r) {
    o.check(r.scalars <= 200, name + " has " + std::to_string(r.scalars) + " parameters");
    o.check(r.max_relative_error < 1e-3, name + " relative error " + fmt(r.max_relative_error) + " at " + r.worst_param);
    o.detail << name << "=" << fmt(r.max_relative_error, 2) << " ";
  };

  {
    Rng rng(31);
    ParameterStore store;
    const CrfHead head = CrfHead::create(store, "t.crf", Group::kNer, 3, BilouTagset({"X"}), rng);
    const Matrix features = testing::random_matrix(4, 3, rng);
    const std::vector<int> gold = {1, 3, 0, 4};
    record("crf", testing::check_gradients(store, all_params(store), [&](Tape& tape) {
             return head.nll(tape, head.emissions(tape, tape.constant(features)), gold);
           }));
  }
  {
    Rng rng(61);
    ParameterStore store;
    CorefOptions opt;
    opt.feature_dim = 2;
    opt.hidden = 3;
    opt.max_width = 2;
    opt.prune_ratio = 1.0;
    const CorefHead head = CorefHead::create(store, "cr.head", Group::kCoref, 2, opt, rng);
    const Matrix tokens = testing::random_matrix(4, 2, rng);
    const std::vector<Cluster> gold = {testing::cluster({0, 2})};
    record("coref", testing::check_gradients(store, all_params(store), [&](Tape& tape) {
             auto f = head.forward(tape, tape.constant(tokens));
             return head.loss(tape, f, gold);
           }));
  }
  {
    Rng rng(7);
    ParameterStore store;
    const RelationHead head = RelationHead::create(store, "re.head", Group::kRelation, 3, {"A", "B"}, {4, 0.5}, rng);
    const Matrix tokens = testing::random_matrix(4, 3, rng);
    const auto pairs = candidate_pairs({0, 2, 3});
    Matrix targets = Matrix::Zero(static_cast<int>(pairs.size()), 2);
    targets(0, 1) = targets(3, 0) = targets(3, 1) = 1;
    record("relation", testing::check_gradients(
                           store,
                           {&store.at("re.head.U"), &store.at("re.head.W"), &store.at("re.head.b"), &store.at("re.head.V")},
                           [&](Tape& tape) { return head.loss(tape, head.logits(tape, tape.constant(tokens), pairs), targets); }));
  }
  {
    Rng rng(7);
    ParameterStore store;
    Vocabulary chars;
    for (const char* c : {"a", "b", "c", "d"}) chars.add(c);
    const CharCNN cnn = CharCNN::create(store, "c", chars, {2, {1, 2}, 2}, rng);
    const std::vector<std::string> words = {"abba", "cd", "dab"};
    const Matrix weights = testing::random_matrix(3, cnn.output_dim(), rng);
    record("char_cnn", testing::check_gradients(store, all_params(store), [&](Tape& tape) {
             return ops::sum(tape, ops::mul(tape, cnn.forward(tape, words), tape.constant(weights)));
           }));
  }
  {
    Rng rng(4);
    ParameterStore store;
    const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, 2, 2, 1, rng);
    const Matrix x = testing::random_matrix(3, 2, rng);
    const Matrix weights = testing::random_matrix(3, 4, rng);
    record("encoder", testing::check_gradients(store, all_params(store), [&](Tape& tape) {
             return ops::sum(tape, ops::mul(tape, enc.encode(tape, tape.constant(x)), tape.constant(weights)));
           }));
  }
  const double secs = seconds_since(start);
  o.check(secs < 120.0, "took " + fmt(secs) + " s");
  o.detail << fmt(secs, 3) << " s";
}

RelationWeights scalar_weights(double u, double w, double b, double v) {
  RelationWeights r;
  r.u = Matrix::Constant(1, 1, u);
  r.w = Matrix::Constant(1, 1, w);
  r.b = RowVector::Constant(1, b);
  r.v = Matrix::Constant(1, 1, v);
  return r;
}

void pair_score_oracle(Outcome& o) {
  const double p = score_pair(Vector::Constant(1, 1.0), Vector::Constant(1, 2.0), scalar_weights(1, 1, 0, 1))(0);
  o.check(std::abs(p - 0.95257) <= 1e-5, "score " + fmt(p, 8));
  RelationWeights zero;
  zero.u = Matrix::Zero(4, 3);
  zero.w = Matrix::Zero(4, 3);
  zero.b = RowVector::Zero(4);
  zero.v = Matrix::Zero(6, 4);
  const Vector z = score_pair(Vector::Constant(3, 0.7), Vector::Constant(3, -1.5), zero);
  bool halves = z.size() == 6;
  for (int k = 0; k < z.size(); ++k) halves = halves && z(k) == 0.5;
  o.check(halves, "zero parameters do not give exactly 0.5");
  o.detail << "sigma(3)=" << fmt(p, 8) << ", zero case exact 0.5";
}

void multi_label(Outcome& o) {
  RelationWeights w = scalar_weights(1, 1, 0, 1);
  w.v = Matrix(2, 1);
  w.v << 1.0, 2.0;
  const Vector p = score_pair(Vector::Constant(1, 1.0), Vector::Constant(1, 2.0), w);
  Matrix probs(1, 2);
  probs << p(0), p(1);
  const auto rels = decode_relations({{0, 1}}, probs, {0, 1}, 0.5, {"ORG-AFF", "PHYS"});
  o.check(rels.size() == 2, std::to_string(rels.size()) + " types decoded");
  o.detail << rels.size() << " types on one pair, p=(" << fmt(p(0)) << ", " << fmt(p(1)) << ")";
}

void coref_metric_oracles(Outcome& o) {
  using testing::cluster;
  const PRF muc_split = muc({cluster({0, 1}), cluster({2})}, {cluster({0, 1, 2})});
  o.check(muc_split.recall == 0.5 && muc_split.precision == 1.0, "MUC split example");
  const PRF b3_split = b_cubed({cluster({0}), cluster({1})}, {cluster({0, 1})});
  o.check(b3_split.recall == 0.5 && b3_split.precision == 1.0, "B3 split example");
  const PRF perfect = b_cubed({cluster({0, 1})}, {cluster({0, 1})});
  o.check(perfect.f1 == 1.0, "B3 identity");
  const PRF ceaf = ceaf_e({cluster({0, 1, 2, 3})}, {cluster({0, 1}), cluster({2, 3})});
  o.check(std::abs(ceaf.recall - 1.0 / 3.0) <= 1e-9 && std::abs(ceaf.precision - 2.0 / 3.0) <= 1e-9,
          "CEAFe merge example");
  Rng rng(73);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto pred = testing::random_clusters(rng, 12, 6);
    const auto gold = testing::random_clusters(rng, 12, 6);
    worst = std::max(worst, std::abs(ceaf_e_parts(pred, gold).p_num - testing::exhaustive_ceaf_similarity(pred, gold)));
  }
  o.check(worst <= 1e-9, "CEAFe alignment differs from exhaustive by " + fmt(worst));
  o.detail << "worked examples exact, 100 alignments max diff " << fmt(worst, 2);
}

double dev_f1(const json& dev, const std::string& task) {
  if (task == "cr") return dev.at("cr").at("avg_f1").get<double>();
  return dev.at(task).at("f1").get<double>();
}

void single_task_overfit(Outcome& o, const fs::path& work) {
  const auto start = Clock::now();
  const fs::path dir = fresh_dir(work / "overfit_single");
  const std::vector<std::pair<std::string, std::string>> setups = {{"B", "ner"}, {"C", "emd"}, {"D", "re"}, {"E", "cr"}};
  for (const auto& [setup, task] : setups) {
    const fs::path cfg = write_file(dir / (setup + ".cfg"), base_config(setup, 5000));
    if (run_train(cfg, dir / setup) != cli::kOk) {
      o.check(false, setup + " failed to train");
      continue;
    }
    const json report = read_json(dir / setup / "report.json");
    const double f1 = dev_f1(report.at("dev"), task);
    const double need = task == "cr" ? 0.90 : 0.99;
    o.check(f1 >= need, setup + " dev F1 " + fmt(f1));
    o.check(report.at("best_updates").get<long>() <= 5000, setup + " best after 5000 updates");
    o.detail << setup << "=" << fmt(f1) << "@" << report.at("best_updates").get<long>() << " ";
  }
  const double secs = seconds_since(start);
  o.check(secs < 600.0, "took " + fmt(secs) + " s");
  o.detail << fmt(secs, 3) << " s";
}

void joint_overfit(Outcome& o, const fs::path& work) {
  const fs::path dir = fresh_dir(work / "overfit_joint");
  const fs::path cfg = write_file(dir / "A.cfg", base_config("A", 20000));
  if (run_train(cfg, dir / "A") != cli::kOk) {
    o.check(false, "setup A failed to train");
    return;
  }
  const json report = read_json(dir / "A" / "report.json");
  for (const char* task : {"ner", "emd", "re", "cr"}) {
    const double f1 = dev_f1(report.at("dev"), task);
    o.check(f1 >= 0.95, std::string(task) + " dev F1 " + fmt(f1));
    o.detail << task << "=" << fmt(f1) << " ";
  }
  o.detail << "best at " << report.at("best_updates").get<long>() << " of " << report.at("updates").get<long>()
           << " updates";
}

void update_scoping(Outcome& o) {
  RunConfig c;
  apply_override(c, "setup=A");
  c.seed = 9;
  c.model.hidden = 8;
  c.model.embedding.word_dim = 8;
  c.model.embedding.char_filters = 4;
  c.model.embedding.contextual_dim = 4;
  c.model.re_hidden = 8;
  c.model.coref.hidden = 8;
  c.model.coref.feature_dim = 4;
  c.trainer.batch_size = 4;
  c.data.synthetic_docs = 12;
  c.data.seed = 5;
  TrainingData data = load_training_data(c);
  HierarchicalModel model = HierarchicalModel::build(c.model, data.all_training_documents(), c.seed);
  Trainer trainer(model, std::move(data), c);
  const HierarchyWiring& wiring = model.wiring();
  ParameterStore& store = model.parameters();
  std::map<Task, int> steps;
  for (int step = 0; step < 100; ++step) {
    const Task task = trainer.sample_task();
    ++steps[task];
    const auto before = store.snapshot();
    trainer.train_step(trainer.next_batch(task));
    const auto deps = wiring.dependencies(task);
    std::set<std::string> expected_encoders;
    for (Task d : deps) expected_encoders.insert(std::string(task_name(d)) + ".encoder");
    bool own = false, embeddings = false;
    std::set<std::string> dep_changed;
    for (std::size_t i = 0; i < store.size(); ++i) {
      const Parameter& p = store[i];
      if (p.value == before[i]) continue;
      if (p.group == group_of(task)) {
        own = true;
      } else if (p.group == Group::kEmbeddings) {
        embeddings = true;
      } else {
        bool allowed = false;
        for (const auto& prefix : expected_encoders) {
          if (p.name.rfind(prefix, 0) == 0) {
            allowed = true;
            dep_changed.insert(prefix);
          }
        }
        o.check(allowed, std::string(task_name(task)) + " step changed " + p.name);
      }
    }
    o.check(own, std::string(task_name(task)) + " step left its own parameters unchanged");
    o.check(embeddings, std::string(task_name(task)) + " step left the embeddings unchanged");
    o.check(dep_changed == expected_encoders, std::string(task_name(task)) + " step missed a lower encoder");
  }
  o.detail << "100 steps (";
  for (const auto& [task, n] : steps) o.detail << task_name(task) << " " << n << " ";
  o.detail << ")";
}

void sampling(Outcome& o) {
  const SamplingPolicy p(SamplingMode::kProportional, {{Task::kNer, 3}, {Task::kEmd, 1}});
  Rng rng(12345);
  const int n = 10000;
  int ner = 0;
  for (int i = 0; i < n; ++i) ner += p.sample(rng) == Task::kNer ? 1 : 0;
  const double freq = static_cast<double>(ner) / n;
  const double e1 = 0.75 * n, e2 = 0.25 * n;
  const double chi = (ner - e1) * (ner - e1) / e1 + ((n - ner) - e2) * ((n - ner) - e2) / e2;
  const double pv = testing::chi_square_p_value(chi, 1);
  o.check(std::abs(freq - 0.75) <= 0.02, "frequency " + fmt(freq));
  o.check(pv > 0.01, "chi-square p " + fmt(pv));
  const SamplingPolicy big(SamplingMode::kProportional, {{Task::kNer, 7273}, {Task::kEmd, 59924}});
  const double diff = std::abs(big.probability(Task::kNer) - 7273.0 / 67197.0);
  o.check(diff <= 1e-12, "probability differs by " + fmt(diff));
  o.detail << "freq (" << fmt(freq) << ", " << fmt(1 - freq) << "), p=" << fmt(pv) << ", 7273/67197 diff " << fmt(diff, 2);
}

void hierarchy_order(Outcome& o, const fs::path& work) {
  const fs::path dir = fresh_dir(work / "order");
  std::map<std::string, json> dims;
  for (const char* setup : {"A", "K", "L"}) {
    const fs::path cfg = write_file(dir / (std::string(setup) + ".cfg"), base_config(setup, 40));
    if (run_train(cfg, dir / setup) != cli::kOk) {
      o.check(false, std::string(setup) + " failed to train");
      return;
    }
    dims[setup] = read_json(dir / setup / "report.json").at("encoder_input_dims");
  }
  const int low = dims["A"].at("ner"), high = dims["A"].at("emd");
  o.check(low < high, "setup A dims not increasing");
  o.check(dims["K"].at("emd") == low && dims["K"].at("ner") == high, "setup K dims not swapped");
  o.check(dims["L"].at("emd") == low && dims["L"].at("ner") == high && dims["L"].at("re") == high &&
              dims["L"].at("cr") == high,
          "setup L dims not swapped");
  o.detail << "A " << dims["A"].dump() << ", K " << dims["K"].dump() << ", L " << dims["L"].dump();
}

void probe_harness(Outcome& o, const fs::path& work) {
  // Separable features.
  Rng rng(5);
  Matrix x = testing::random_matrix(200, 4, rng);
  std::vector<int> y(200);
  for (int i = 0; i < 200; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    x(i, 1) = (i % 2 == 0 ? -1.0 : 1.0) * (0.5 + std::abs(x(i, 1)));
  }
  const ProbeResult sep = train_probe(x.topRows(100), {y.begin(), y.begin() + 100}, Matrix(0, 4), {},
                                      x.bottomRows(100), {y.begin() + 100, y.end()}, 2);
  o.check(sep.train_accuracy == 1.0 && sep.test_accuracy == 1.0, "separable accuracy " + fmt(sep.test_accuracy));

  // Null probe on real representations of a trained model.
  const fs::path dir = fresh_dir(work / "probe");
  const fs::path cfg = write_file(dir / "F.cfg", base_config("F", 200));
  if (run_train(cfg, dir / "model") != cli::kOk) {
    o.check(false, "probe model failed to train");
    return;
  }
  LoadedCheckpoint loaded = load_checkpoint(dir / "model" / "checkpoint");
  const auto before = loaded.model.parameters().snapshot();
  ProbeTask task = make_synthetic_probe("bigram_shift", 7, 3000);
  std::vector<ProbeExample> all = task.train;
  all.insert(all.end(), task.dev.begin(), task.dev.end());
  all.insert(all.end(), task.test.begin(), task.test.end());
  std::bernoulli_distribution coin(0.5);
  std::vector<int> labels(all.size());
  for (auto& l : labels) l = coin(rng) ? 1 : 0;
  const Matrix feats = embed_examples(loaded.model, all, parse_probe_layer("g_ner"));
  const int train_n = 1000;
  const int test_n = static_cast<int>(all.size()) - train_n;
  const ProbeResult null = train_probe(feats.topRows(train_n), {labels.begin(), labels.begin() + train_n},
                                       Matrix(0, feats.cols()), {}, feats.bottomRows(test_n),
                                       {labels.begin() + train_n, labels.end()}, 2);
  o.check(std::abs(null.test_accuracy - 0.5) <= 0.05, "null probe accuracy " + fmt(null.test_accuracy));

  run_probe_suite(loaded.model, {make_synthetic_probe("length", 1, 200)}, {"g_emb-max", "g_ner", "g_emd"});
  const auto after = loaded.model.parameters().snapshot();
  bool identical = before.size() == after.size();
  for (std::size_t i = 0; identical && i < before.size(); ++i) {
    identical = before[i].size() == after[i].size() &&
                std::memcmp(before[i].data(), after[i].data(), sizeof(double) * static_cast<std::size_t>(before[i].size())) == 0;
  }
  o.check(identical, "probing changed model parameters");
  o.detail << "separable " << fmt(sep.test_accuracy) << ", null " << fmt(null.test_accuracy) << " on " << test_n
           << " sentences, parameters bit-identical";
}

void determinism(Outcome& o, const fs::path& work) {
  const fs::path dir = fresh_dir(work / "determinism");
  std::ostringstream sink, err;
  const fs::path cfg = write_file(dir / "run.cfg", base_config("A", 60) + "trainer.eval_interval = 20\n");
  const fs::path data = dir / "data.jsonl";
  o.check(cli::cmd_generate({8, 21, data, {}}, sink, err) == cli::kOk, "generate-data failed");
  auto same = [&](const std::string& what, const fs::path& a, const fs::path& b) {
    const bool ok = fs::exists(a) && read_bytes(a) == read_bytes(b);
    o.check(ok, what + " differs between runs");
    return ok;
  };
  int compared = 0;
  for (const char* run : {"train1", "train2"}) {
    o.check(run_train(cfg, dir / run) == cli::kOk, std::string(run) + " failed");
  }
  compared += same("train metrics.json", dir / "train1" / "metrics.json", dir / "train2" / "metrics.json");
  compared += same("train report.json", dir / "train1" / "report.json", dir / "train2" / "report.json");
  for (const char* run : {"eval1", "eval2"}) {
    o.check(cli::cmd_eval({dir / "train1" / "checkpoint", data, false, {}, dir / run}, sink, err) == cli::kOk,
            std::string(run) + " failed");
  }
  compared += same("eval metrics.json", dir / "eval1" / "metrics.json", dir / "eval2" / "metrics.json");
  compared += same("eval predictions", dir / "eval1" / "predictions.jsonl", dir / "eval2" / "predictions.jsonl");
  for (const char* run : {"probe1", "probe2"}) {
    cli::ProbeCommandOptions p;
    p.checkpoint = dir / "train1" / "checkpoint";
    p.synthetic = {"length", "bigram_shift"};
    p.synthetic_sentences = 200;
    p.epochs = 100;
    p.out = dir / run;
    o.check(cli::cmd_probe(p, sink, err) == cli::kOk, std::string(run) + " failed");
  }
  compared += same("probe.json", dir / "probe1" / "probe.json", dir / "probe2" / "probe.json");
  const fs::path small = write_file(dir / "small.cfg", base_config("B", 40) + "trainer.eval_interval = 20\n");
  for (const char* run : {"ablate1", "ablate2"}) {
    o.check(cli::cmd_ablate({small, {}, "B,-contextual", false, dir / run}, sink, err) == cli::kOk,
            std::string(run) + " failed");
  }
  compared += same("ablation.json", dir / "ablate1" / "ablation.json", dir / "ablate2" / "ablation.json");
  compared += same("ablation.tsv", dir / "ablate1" / "ablation.tsv", dir / "ablate2" / "ablation.tsv");
  if (!o.pass && !err.str().empty()) o.detail << " (" << err.str().substr(0, 200) << ")";
  o.detail << compared << " report files byte-identical across train/eval/probe/ablate reruns";
}

struct Criterion {
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace
}  // namespace hmtl

int main(int argc, char** argv) {
  using namespace hmtl;
  fs::path work = fs::temp_directory_path() / "hmtl_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--workdir DIR] [--only N[,N...]]\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<Criterion> criteria = {
      {"CRF oracle equivalence", crf_oracle},
      {"Gradient checks", gradient_checks},
      {"Pair scorer hand oracle", pair_score_oracle},
      {"Multi-label relations", multi_label},
      {"Coreference metric oracles", coref_metric_oracles},
      {"Single-task overfit (B, C, D, E)", [&](Outcome& o) { single_task_overfit(o, work); }},
      {"Joint overfit (A)", [&](Outcome& o) { joint_overfit(o, work); }},
      {"Update scoping", update_scoping},
      {"Proportional sampling", sampling},
      {"Hierarchy order (K, L)", [&](Outcome& o) { hierarchy_order(o, work); }},
      {"Probe harness", [&](Outcome& o) { probe_harness(o, work); }},
      {"Determinism", [&](Outcome& o) { determinism(o, work); }},
  };

  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    ++ran;
    Outcome o;
    try {
      criteria[i].run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << number << "] " << criteria[i].name << ": "
              << o.detail.str() << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
