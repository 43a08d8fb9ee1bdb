#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hmtl/checkpoint.hpp"
#include "hmtl/cli.hpp"
#include "hmtl/config.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/error.hpp"
#include "hmtl/logging.hpp"
#include "hmtl/probe.hpp"
#include "hmtl/synthetic.hpp"
#include "hmtl/trainer.hpp"

namespace hmtl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

void ensure_dir(const fs::path& dir, const char* field) {
  if (dir.empty()) throw ConfigError(field, "an output directory is required");
  fs::create_directories(dir);
}

ordered_json config_json(const std::map<std::string, std::string>& resolved) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : resolved) j[k] = v;
  return j;
}

// The report wrapper shared by train and eval: resolved config, seed, metrics.
std::string metrics_document(const RunConfig& config, const MetricReport& report,
                             const std::optional<MetricReport>& test = std::nullopt) {
  ordered_json j;
  j["config"] = config_json(config.resolved());
  j["seed"] = config.seed;
  j["metrics"] = ordered_json::parse(report.to_json());
  if (test) j["test_metrics"] = ordered_json::parse(test->to_json());
  return j.dump(2);
}

ordered_json spans_json(const std::vector<TaggedSpan>& spans) {
  ordered_json out = ordered_json::array();
  for (const auto& s : spans) out.push_back({s.start, s.end, s.label});
  return out;
}

std::string prediction_record(const DocumentPrediction& p, const HierarchicalModel& model) {
  ordered_json j;
  j["doc_id"] = p.doc_id;
  if (model.has(Task::kNer)) j["ner"] = spans_json(p.ner);
  if (model.has(Task::kEmd)) j["mentions"] = spans_json(p.emd);
  if (model.has(Task::kRelation)) {
    ordered_json rels = ordered_json::array();
    for (const auto& r : p.relations) {
      rels.push_back({{"type", r.type},
                      {"arg1_last", r.arg1_last},
                      {"arg2_last", r.arg2_last},
                      {"p", r.probability}});
    }
    j["relations"] = rels;
  }
  if (model.has(Task::kCoref)) {
    ordered_json clusters = ordered_json::array();
    for (const auto& c : p.clusters) {
      ordered_json members = ordered_json::array();
      for (const auto& m : c) members.push_back({m.start, m.end});
      clusters.push_back(members);
    }
    j["clusters"] = clusters;
  }
  return j.dump();
}

std::vector<Document> load_documents(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("data", "file not found: " + path.string());
  if (path.extension() == ".jsonl" || path.extension() == ".json") return load_jsonl(path);
  return load_conll_ner(path);
}

RunConfig prepare_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (path.empty()) throw ConfigError("config", "a config file is required");
  RunConfig config = load_config(path);
  for (const auto& o : overrides) apply_override(config, o);
  apply_environment(config);
  config.validate();
  return config;
}

struct RunOutcome {
  RunConfig config;
  TrainingReport report;
  double seconds = 0.0;
};

RunOutcome train_and_save(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  const auto start = std::chrono::steady_clock::now();
  TrainingData data = load_training_data(config);
  HierarchicalModel model = HierarchicalModel::build(config.model, data.all_training_documents(), config.seed);
  Trainer trainer(model, std::move(data), config);
  TrainingReport report = trainer.train();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_text(out / "config.txt", config.to_text());
  write_text(out / "report.json", report.to_json());
  write_text(out / "metrics.json", metrics_document(config, report.dev, report.test));
  ordered_json timing;
  timing["wall_seconds"] = seconds;
  timing["updates"] = report.updates;
  write_text(out / "timing.json", timing.dump(2));
  save_checkpoint(out / "checkpoint", model, config);
  return {config, std::move(report), seconds};
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

bool bit_identical(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
    if (std::memcmp(a[i].data(), b[i].data(), sizeof(double) * a[i].size()) != 0) return false;
  }
  return true;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// One row of an ablation: either a setup letter or a set of removed
// embedding kinds.
struct AblationRow {
  std::string name;
  std::string setup;
  std::set<std::string> removed;
};

std::vector<AblationRow> parse_ablation(const std::string& spec) {
  std::vector<AblationRow> rows;
  const auto letters = setup_letters();
  for (const auto& item : split_list(spec)) {
    AblationRow row;
    row.name = item;
    if (item.front() == '-') {
      std::stringstream ss(item.substr(1));
      std::string kind;
      while (std::getline(ss, kind, '-')) {
        if (kind != "word" && kind != "char" && kind != "contextual") {
          throw ConfigError("ablate.spec", "unknown embedding kind '" + kind + "' in '" + item + "'");
        }
        row.removed.insert(kind);
      }
      if (row.removed.empty()) throw ConfigError("ablate.spec", "empty embedding removal '" + item + "'");
    } else {
      if (std::find(letters.begin(), letters.end(), item) == letters.end()) {
        throw ConfigError("ablate.spec", "unknown setup letter '" + item + "'");
      }
      row.setup = item;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("ablate.spec", "the ablation spec is empty");
  return rows;
}

std::string f1_cell(const MetricReport& report, Task task) {
  if (!report.has(task)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * report.primary_f1(task);
  return os.str();
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

}  // namespace

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig config = prepare_config(options.config, options.overrides);
    ensure_dir(options.out, "out");
    RunOutcome run = train_and_save(config, options.out);
    out << run.report.dev.to_text();
    out << "updates: " << run.report.updates << " (best at " << run.report.best_updates << ", "
        << run.report.stop_reason << ")\n";
    out << "artifacts: " << options.out.string() << '\n';
    return kOk;
  });
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.checkpoint.empty()) throw ConfigError("checkpoint", "a checkpoint directory is required");
    if (options.data.empty()) throw ConfigError("data", "an evaluation data file is required");
    ensure_dir(options.out, "out");
    LoadedCheckpoint loaded = load_checkpoint(options.checkpoint, options.overrides);
    const HierarchicalModel& model = loaded.model;
    if (options.gold_mentions && !model.has(Task::kCoref)) {
      throw ConfigError("coref.gold_mentions", "gold-mention evaluation needs a model with coreference");
    }
    const bool gm = options.gold_mentions || loaded.config.model.gold_mentions;
    RunConfig config = loaded.config;
    config.model.gold_mentions = gm;

    const std::vector<Document> docs = load_documents(options.data);
    const MetricReport report = model.evaluate(docs, model.wiring().tasks(), gm);

    std::ostringstream preds;
    for (const auto& doc : docs) preds << prediction_record(model.predict(doc, gm), model) << '\n';

    write_text(options.out / "metrics.json", metrics_document(config, report));
    write_text(options.out / "metrics.txt", report.to_text());
    write_text(options.out / "predictions.jsonl", preds.str());
    out << report.to_text();
    return kOk;
  });
}

int cmd_probe(const ProbeCommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.checkpoint.empty()) throw ConfigError("checkpoint", "a checkpoint directory is required");
    ensure_dir(options.out, "out");
    LoadedCheckpoint loaded = load_checkpoint(options.checkpoint);
    const HierarchicalModel& model = loaded.model;

    std::vector<ProbeTask> tasks;
    for (const auto& spec : options.tasks) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("task", "expected NAME=PATH, got '" + spec + "'");
      }
      tasks.push_back(load_probe_task(spec.substr(eq + 1), spec.substr(0, eq)));
    }
    for (const auto& kind : options.synthetic) {
      tasks.push_back(make_synthetic_probe(kind, options.seed, options.synthetic_sentences));
    }
    if (tasks.empty()) throw ConfigError("task", "no probing task given");

    std::vector<std::string> layers = options.layers;
    if (layers.empty()) {
      for (const auto& name : probe_layer_names()) {
        const ProbeLayer layer = parse_probe_layer(name);
        if (layer.source == Source::kEmbeddings) {
          layers.push_back(name);
        } else {
          for (Task t : model.wiring().tasks()) {
            if (source_of(t) == layer.source) layers.push_back(name);
          }
        }
      }
    }

    const auto before = model.parameters().snapshot();
    ProbeOptions probe_options;
    probe_options.epochs = options.epochs;
    probe_options.l2 = options.l2;
    const ProbeGrid grid = run_probe_suite(model, tasks, layers, probe_options);
    if (!bit_identical(before, model.parameters().snapshot())) {
      throw std::runtime_error("probing modified model parameters");
    }

    write_text(options.out / "probe.tsv", grid.to_tsv());
    write_text(options.out / "probe.json", grid.to_json());
    out << grid.to_tsv();
    return kOk;
  });
}

int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::vector<AblationRow> rows = parse_ablation(options.spec);
    const RunConfig base = prepare_config(options.config, options.overrides);
    ensure_dir(options.out, "out");

    std::vector<RunConfig> configs;
    for (const auto& row : rows) {
      RunConfig c = base;
      if (!row.setup.empty()) apply_setting(c, "setup", row.setup);
      if (row.removed.count("word")) c.model.embedding.use_word = false;
      if (row.removed.count("char")) c.model.embedding.use_char = false;
      if (row.removed.count("contextual")) c.model.embedding.use_contextual = false;
      c.validate();
      configs.push_back(std::move(c));
    }

    std::vector<RunOutcome> runs(rows.size());
    if (options.parallel) {
      std::vector<std::future<RunOutcome>> futures;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        futures.push_back(std::async(std::launch::async, train_and_save, configs[i],
                                     options.out / rows[i].name));
      }
      for (std::size_t i = 0; i < rows.size(); ++i) runs[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        runs[i] = train_and_save(configs[i], options.out / rows[i].name);
      }
    }

    // Scores come from the test split when there is one.
    auto scores = [](const TrainingReport& r) -> const MetricReport& { return r.test ? *r.test : r.dev; };

    std::ostringstream table;
    table << "row\tsetup\thierarchy\tword\tchar\tcontextual\tNER\tEMD\tRE\tCR-MUC\tCR-B3\tCR-CEAFe\tCR-Avg\n";
    ordered_json j;
    j["spec"] = options.spec;
    j["seed"] = base.seed;
    j["rows"] = ordered_json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& c = runs[i].config;
      const MetricReport& m = scores(runs[i].report);
      const auto& e = c.model.embedding;
      table << rows[i].name << '\t' << (c.setup.empty() ? "-" : c.setup) << '\t' << c.model.hierarchy
            << '\t' << (e.use_word ? "on" : "off") << '\t' << (e.use_char ? "on" : "off") << '\t'
            << (e.use_contextual ? "on" : "off") << '\t' << f1_cell(m, Task::kNer) << '\t'
            << f1_cell(m, Task::kEmd) << '\t' << f1_cell(m, Task::kRelation);
      if (m.coref) {
        table << '\t' << pct(m.coref->muc.f1) << '\t' << pct(m.coref->b_cubed.f1) << '\t'
              << pct(m.coref->ceaf_e.f1) << '\t' << pct(m.coref->average_f1);
      } else {
        table << "\t-\t-\t-\t-";
      }
      table << '\n';

      ordered_json row;
      row["row"] = rows[i].name;
      row["setup"] = c.setup;
      row["hierarchy"] = c.model.hierarchy;
      row["embeddings"] = {{"word", e.use_word}, {"char", e.use_char}, {"contextual", e.use_contextual}};
      row["updates"] = runs[i].report.updates;
      row["metrics"] = ordered_json::parse(m.to_json());
      row["config"] = config_json(c.resolved());
      j["rows"].push_back(row);
    }

    // Updates-to-best of each multi-task row against every single-task row
    // with the same embeddings that shares one of its tasks.
    std::ostringstream speed;
    speed << "multi\tsingle\ttask\tmulti_updates\tsingle_updates\tdelta_percent\tdelta_f1\n";
    j["speed"] = ordered_json::array();
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (runs[a].report.tasks.size() < 2) continue;
      for (std::size_t b = 0; b < rows.size(); ++b) {
        if (runs[b].report.tasks.size() != 1 || rows[b].removed != rows[a].removed) continue;
        for (const auto& d : compare_speed(runs[a].report, runs[b].report)) {
          std::ostringstream df;
          df << std::showpos << std::fixed << std::setprecision(2) << d.delta_f1;
          speed << rows[a].name << '\t' << rows[b].name << '\t' << task_name(d.task) << '\t'
                << d.multi_updates << '\t' << d.single_updates << '\t' << std::showpos
                << d.delta_percent << std::noshowpos << "%\t" << df.str() << '\n';
          j["speed"].push_back({{"multi", rows[a].name},
                                {"single", rows[b].name},
                                {"task", std::string(task_name(d.task))},
                                {"multi_updates", d.multi_updates},
                                {"single_updates", d.single_updates},
                                {"delta_percent", d.delta_percent},
                                {"delta_f1", d.delta_f1}});
        }
      }
    }

    write_text(options.out / "ablation.tsv", table.str());
    write_text(options.out / "speed.tsv", speed.str());
    write_text(options.out / "ablation.json", j.dump(2));
    out << table.str();
    if (!j["speed"].empty()) out << '\n' << speed.str();
    return kOk;
  });
}

int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.docs < 1) throw ConfigError("docs", "must be at least 1");
    if (options.out.empty() && options.split_dir.empty()) {
      throw ConfigError("out", "give an output file or a split directory");
    }
    const auto docs = generate_synthetic_corpus(options.seed, options.docs);
    if (!options.out.empty()) {
      if (options.out.has_parent_path()) fs::create_directories(options.out.parent_path());
      write_jsonl(options.out, docs);
      out << "wrote " << docs.size() << " documents to " << options.out.string() << '\n';
    }
    if (!options.split_dir.empty()) {
      fs::create_directories(options.split_dir);
      const DocumentSplit split = split_documents(docs, SplitRatios{}, options.seed);
      write_jsonl(options.split_dir / "train.jsonl", split.train);
      write_jsonl(options.split_dir / "dev.jsonl", split.dev);
      write_jsonl(options.split_dir / "test.jsonl", split.test);
      out << "wrote " << split.train.size() << "/" << split.dev.size() << "/" << split.test.size()
          << " train/dev/test documents to " << options.split_dir.string() << '\n';
    }
    return kOk;
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical multi-task tagger: NER, mention detection, relations, coreference"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("-c,--config", train.config, "Config file")->required();
  train_cmd->add_option("-s,--set", train.overrides, "Override a config key (key=value)");
  train_cmd->add_option("-o,--out", train.out, "Output directory")->required();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a data file");
  eval_cmd->add_option("-m,--checkpoint", eval.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("-d,--data", eval.data, "JSONL or CoNLL file")->required();
  eval_cmd->add_flag("--gold-mentions", eval.gold_mentions, "Score coreference over gold mentions");
  eval_cmd->add_option("-s,--set", eval.overrides, "Override a stored config key (key=value)");
  eval_cmd->add_option("-o,--out", eval.out, "Output directory")->required();

  ProbeCommandOptions probe;
  auto* probe_cmd = app.add_subcommand("probe", "Fit probing classifiers on frozen representations");
  probe_cmd->add_option("-m,--checkpoint", probe.checkpoint, "Checkpoint directory")->required();
  probe_cmd->add_option("-t,--task", probe.tasks, "Probing task NAME=PATH (TSV)");
  probe_cmd->add_option("--synthetic", probe.synthetic, "Synthetic probe: length, word_content, bigram_shift");
  probe_cmd->add_option("--sentences", probe.synthetic_sentences, "Sentences per synthetic probe");
  probe_cmd->add_option("--seed", probe.seed, "Seed of the synthetic probes");
  probe_cmd->add_option("-l,--layers", probe.layers, "Layers, e.g. g_emb-max g_ner");
  probe_cmd->add_option("--epochs", probe.epochs, "Gradient descent epochs");
  probe_cmd->add_option("--l2", probe.l2, "L2 penalty");
  probe_cmd->add_option("-o,--out", probe.out, "Output directory")->required();

  AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare several setups");
  ablate_cmd->add_option("-c,--config", ablate.config, "Base config file")->required();
  ablate_cmd->add_option("--spec", ablate.spec, "Rows, e.g. A,B,C or -contextual,-contextual-char")->required();
  ablate_cmd->add_option("-s,--set", ablate.overrides, "Override a base config key (key=value)");
  ablate_cmd->add_flag("--parallel", ablate.parallel, "Train rows concurrently");
  ablate_cmd->add_option("-o,--out", ablate.out, "Output directory")->required();

  GenerateOptions generate;
  auto* generate_cmd = app.add_subcommand("generate-data", "Write a synthetic corpus");
  generate_cmd->add_option("-n,--docs", generate.docs, "Number of documents");
  generate_cmd->add_option("--seed", generate.seed, "Generator seed");
  generate_cmd->add_option("-o,--out", generate.out, "Output JSONL file");
  generate_cmd->add_option("--split-dir", generate.split_dir, "Also write train/dev/test.jsonl here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfigError;
  }

  if (verbose) set_log_level(LogLevel::kInfo);
  if (train_cmd->parsed()) return cmd_train(train, out, err);
  if (eval_cmd->parsed()) return cmd_eval(eval, out, err);
  if (probe_cmd->parsed()) return cmd_probe(probe, out, err);
  if (ablate_cmd->parsed()) return cmd_ablate(ablate, out, err);
  if (generate_cmd->parsed()) return cmd_generate(generate, out, err);
  return kConfigError;
}

}  // namespace hmtl::cli
