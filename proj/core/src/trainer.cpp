#include "hmtl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hmtl/error.hpp"
#include "hmtl/logging.hpp"
#include "hmtl/synthetic.hpp"

namespace hmtl {

using json = nlohmann::ordered_json;

SamplingMode parse_sampling_mode(std::string_view name) {
  if (name == "proportional") return SamplingMode::kProportional;
  if (name == "uniform") return SamplingMode::kUniform;
  throw ConfigError("trainer.sampling", "expected proportional or uniform");
}

SamplingPolicy::SamplingPolicy(SamplingMode mode, std::map<Task, std::size_t> sizes) : mode_(mode) {
  if (sizes.empty()) throw ConfigError("model.hierarchy", "no task to sample");
  double total = 0.0;
  for (const auto& [task, size] : sizes) {
    if (size == 0) {
      throw ConfigError("data.train", "empty training set for task " + std::string(task_name(task)));
    }
    tasks_.push_back(task);
    total += static_cast<double>(size);
  }
  for (const auto& [task, size] : sizes) {
    probabilities_.push_back(mode == SamplingMode::kProportional ? static_cast<double>(size) / total
                                                                 : 1.0 / static_cast<double>(sizes.size()));
  }
}

double SamplingPolicy::probability(Task task) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i] == task) return probabilities_[i];
  }
  return 0.0;
}

Task SamplingPolicy::sample(Rng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    acc += probabilities_[i];
    if (u < acc) return tasks_[i];
  }
  return tasks_.back();
}

bool ConvergenceMonitor::observe(double metric, long updates) {
  ++observed_;
  if (metric > best_) {
    best_ = metric;
    best_updates_ = updates;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

// ---------------------------------------------------------------------------
// Data

namespace {

std::vector<Document> load_any(const std::string& path) {
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") return load_jsonl(path);
  return load_conll_ner(path);
}

std::vector<Task> kept_order(const std::map<Task, TaskDataset>& tasks) {
  std::vector<Task> out;
  for (const auto& [t, d] : tasks) out.push_back(t);
  return out;
}

}  // namespace

std::vector<Document> TrainingData::all_training_documents() const {
  std::vector<Document> out;
  std::vector<const std::vector<Document>*> seen;
  for (const auto& [task, d] : tasks) {
    bool dup = false;
    for (const auto* s : seen) dup = dup || *s == d.train;
    if (dup) continue;
    seen.push_back(&d.train);
    out.insert(out.end(), d.train.begin(), d.train.end());
  }
  return out;
}

TrainingData load_training_data(const RunConfig& config) {
  const DataConfig& dc = config.data;
  std::vector<Document> train, dev, test;
  if (dc.synthetic_docs > 0) {
    auto split = split_documents(generate_synthetic_corpus(dc.seed, dc.synthetic_docs), dc.split, dc.seed);
    train = std::move(split.train);
    dev = std::move(split.dev);
    test = std::move(split.test);
  } else if (!dc.corpus.empty()) {
    auto split = split_documents(load_jsonl(dc.corpus), dc.split, dc.seed);
    train = std::move(split.train);
    dev = std::move(split.dev);
    test = std::move(split.test);
  } else {
    if (dc.train.empty()) throw ConfigError("data.train", "no training data configured");
    if (dc.dev.empty()) throw ConfigError("data.dev", "no development data configured");
    if (!std::filesystem::exists(dc.train)) throw ConfigError("data.train", "no such file: " + dc.train);
    if (!std::filesystem::exists(dc.dev)) throw ConfigError("data.dev", "no such file: " + dc.dev);
    train = load_jsonl(dc.train);
    dev = load_jsonl(dc.dev);
    if (!dc.test.empty()) {
      if (!std::filesystem::exists(dc.test)) throw ConfigError("data.test", "no such file: " + dc.test);
      test = load_jsonl(dc.test);
    }
  }
  if (train.empty()) throw ConfigError("data.train", "training split is empty");
  if (dev.empty()) throw ConfigError("data.dev", "development split is empty");

  TrainingData data;
  auto shared_dev = std::make_shared<const std::vector<Document>>(std::move(dev));
  for (Task t : config.wiring().tasks()) data.tasks[t] = TaskDataset{train, shared_dev};
  if (data.tasks.count(Task::kNer)) {
    if (!dc.ner_train.empty()) {
      if (!std::filesystem::exists(dc.ner_train)) throw ConfigError("data.ner_train", "no such file: " + dc.ner_train);
      data.tasks[Task::kNer].train = load_any(dc.ner_train);
    }
    if (!dc.ner_dev.empty()) {
      if (!std::filesystem::exists(dc.ner_dev)) throw ConfigError("data.ner_dev", "no such file: " + dc.ner_dev);
      data.tasks[Task::kNer].dev = std::make_shared<const std::vector<Document>>(load_any(dc.ner_dev));
    }
  }
  if (!test.empty()) data.test = std::make_shared<const std::vector<Document>>(std::move(test));
  return data;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

std::map<Task, std::size_t> dataset_sizes(const TrainingData& data) {
  std::map<Task, std::size_t> out;
  for (const auto& [task, d] : data.tasks) out[task] = count_sentences(d.train);
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL + 1;
}

}  // namespace

Trainer::Trainer(HierarchicalModel& model, TrainingData data, const RunConfig& config)
    : model_(model),
      data_(std::move(data)),
      config_(config),
      policy_(parse_sampling_mode(config.trainer.sampling), dataset_sizes(data_)),
      adam_(AdamConfig{config.trainer.learning_rate, 0.9, 0.999, 1e-8, config.trainer.clip_norm}),
      task_rng_(stream_seed(config.seed, 1)),
      batch_rng_(stream_seed(config.seed, 2)),
      dropout_rng_(stream_seed(config.seed, 3)) {
  long smallest = -1;
  for (const auto& [task, d] : data_.tasks) {
    if (!model_.has(task)) throw ConfigError("model.hierarchy", "data given for an unconfigured task");
    auto& units = units_[task];
    for (int i = 0; i < static_cast<int>(d.train.size()); ++i) {
      if (task == Task::kCoref) {
        units.push_back({i, -1});
        continue;
      }
      for (int s = 0; s < static_cast<int>(d.train[static_cast<std::size_t>(i)].sentences.size()); ++s) {
        if (task == Task::kRelation && gold_head_lasts(d.train[static_cast<std::size_t>(i)], s).size() < 2) continue;
        units.push_back({i, s});
      }
    }
    if (units.empty()) {
      throw ConfigError("data.train", "no usable training examples for task " + std::string(task_name(task)));
    }
    const long per_epoch = task == Task::kCoref
                               ? static_cast<long>(units.size())
                               : (static_cast<long>(units.size()) + config_.trainer.batch_size - 1) /
                                     config_.trainer.batch_size;
    smallest = smallest < 0 ? per_epoch : std::min(smallest, per_epoch);
    samples_[task] = 0;
  }
  eval_interval_ = config_.trainer.eval_interval > 0 ? config_.trainer.eval_interval : std::max(1L, smallest);
}

Task Trainer::sample_task() { return policy_.sample(task_rng_); }

TaskBatch Trainer::next_batch(Task task) {
  const auto& units = units_.at(task);
  auto& order = order_[task];
  auto& cursor = cursor_[task];
  auto draw = [&]() {
    if (cursor >= order.size()) {
      order.resize(units.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), batch_rng_);
      cursor = 0;
    }
    return units[order[cursor++]];
  };
  TaskBatch batch;
  batch.task = task;
  if (task == Task::kCoref) {
    batch.document = draw().doc;
    return batch;
  }
  const int n = std::min<int>(config_.trainer.batch_size, static_cast<int>(units.size()));
  for (int i = 0; i < n; ++i) batch.sentences.push_back(draw());
  return batch;
}

double Trainer::train_step(const TaskBatch& batch) {
  const auto& docs = data_.tasks.at(batch.task).train;
  Tape tape;
  std::map<int, std::unique_ptr<ForwardPass>> passes;
  auto pass_for = [&](int doc) -> ForwardPass& {
    auto& p = passes[doc];
    if (!p) p = std::make_unique<ForwardPass>(model_, tape, docs.at(static_cast<std::size_t>(doc)), &dropout_rng_);
    return *p;
  };
  std::vector<Var> losses;
  if (batch.task == Task::kCoref) {
    losses.push_back(model_.document_loss(pass_for(batch.document)));
  } else {
    for (const auto& ref : batch.sentences) {
      Var l = model_.sentence_loss(pass_for(ref.doc), batch.task, ref.sentence);
      if (l.valid()) losses.push_back(l);
    }
  }
  if (losses.empty()) return 0.0;
  Var total = ops::scale(tape, ops::sum(tape, ops::concat_rows(tape, losses)),
                         1.0 / static_cast<double>(losses.size()));
  const double value = tape.value(total)(0, 0);
  if (!std::isfinite(value)) {
    throw NumericError("non-finite " + std::string(task_name(batch.task)) + " loss at update " +
                       std::to_string(updates_ + 1));
  }
  tape.backward(total);
  adam_.step(model_.parameters());
  ++updates_;
  ++samples_[batch.task];
  return value;
}

MetricReport Trainer::evaluate_dev() const {
  MetricReport out;
  std::vector<std::pair<const std::vector<Document>*, std::vector<Task>>> groups;
  for (const auto& [task, d] : data_.tasks) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == d.dev.get(); });
    if (it == groups.end()) {
      groups.push_back({d.dev.get(), {task}});
    } else {
      it->second.push_back(task);
    }
  }
  for (const auto& [dev, tasks] : groups) {
    MetricReport r = model_.evaluate(*dev, tasks, config_.model.gold_mentions);
    for (const auto& [t, prf] : r.spans) out.spans[t] = prf;
    if (r.coref) {
      out.coref = r.coref;
      out.gold_mentions = r.gold_mentions;
    }
  }
  return out;
}

TrainingReport Trainer::train() {
  TrainingReport report;
  report.config = config_.resolved();
  report.seed = config_.seed;
  report.hierarchy = model_.wiring().to_string();
  report.tasks = model_.wiring().tasks();
  for (Task t : report.tasks) report.encoder_input_dims[t] = model_.encoder(t).input_dim();
  report.sampling = config_.trainer.sampling;
  for (Task t : policy_.tasks()) report.sampling_probabilities[t] = policy_.probability(t);
  report.eval_interval = eval_interval_;

  ConvergenceMonitor monitor(config_.trainer.patience);
  std::vector<Matrix> best_snapshot;
  std::optional<MetricReport> best_dev;
  std::optional<MetricReport> last_dev;
  const std::vector<Task> tasks = kept_order(data_.tasks);
  report.stop_reason = "max_updates";

  while (updates_ < config_.trainer.max_updates) {
    const Task task = sample_task();
    train_step(next_batch(task));
    if (updates_ % eval_interval_ != 0 && updates_ < config_.trainer.max_updates) continue;

    MetricReport dev = evaluate_dev();
    EvaluationRecord rec;
    rec.updates = updates_;
    double sum = 0.0;
    for (Task t : tasks) {
      const double f1 = dev.primary_f1(t);
      rec.f1[t] = f1;
      sum += f1;
      auto& best = report.best_per_task[t];
      if (best.updates == 0 || f1 > best.f1) best = {f1, updates_};
    }
    rec.mean = sum / static_cast<double>(tasks.size());
    report.history.push_back(rec);
    log_info() << "update " << updates_ << " dev mean F1 " << rec.mean;
    if (monitor.observe(rec.mean, updates_)) {
      best_snapshot = model_.parameters().snapshot();
      best_dev = dev;
    }
    last_dev = std::move(dev);
    if (monitor.converged()) {
      report.converged = true;
      report.stop_reason = "converged";
      break;
    }
  }

  if (config_.trainer.checkpoint == "best" && !best_snapshot.empty()) {
    model_.parameters().restore(best_snapshot);
    report.dev = *best_dev;
  } else if (last_dev) {
    report.dev = *last_dev;
  }
  report.updates = updates_;
  report.best_updates = monitor.best_updates();
  report.best_metric = std::max(0.0, monitor.best());
  report.samples = samples_;
  if (data_.test) report.test = model_.evaluate(*data_.test, tasks, config_.model.gold_mentions);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

json task_map(const std::map<Task, double>& m) {
  json j = json::object();
  for (const auto& [t, v] : m) j[std::string(task_name(t))] = v;
  return j;
}

}  // namespace

std::string TrainingReport::to_json() const {
  json j;
  j["seed"] = seed;
  j["hierarchy"] = hierarchy;
  json t = json::array();
  for (Task task : tasks) t.push_back(task_name(task));
  j["tasks"] = t;
  json dims = json::object();
  for (const auto& [task, d] : encoder_input_dims) dims[std::string(task_name(task))] = d;
  j["encoder_input_dims"] = dims;
  j["sampling"] = {{"mode", sampling}, {"probabilities", task_map(sampling_probabilities)}};
  json counts = json::object();
  for (const auto& [task, c] : samples) counts[std::string(task_name(task))] = c;
  j["sampling"]["counts"] = counts;
  j["monitored_metric"] = "mean of per-task primary dev F1";
  j["eval_interval"] = eval_interval;
  j["updates"] = updates;
  j["best_updates"] = best_updates;
  j["best_metric"] = best_metric;
  j["converged"] = converged;
  j["stop_reason"] = stop_reason;
  json best = json::object();
  for (const auto& [task, b] : best_per_task) {
    best[std::string(task_name(task))] = {{"f1", b.f1}, {"updates", b.updates}};
  }
  j["best_per_task"] = best;
  json hist = json::array();
  for (const auto& r : history) hist.push_back({{"updates", r.updates}, {"f1", task_map(r.f1)}, {"mean", r.mean}});
  j["history"] = hist;
  j["dev"] = json::parse(dev.to_json());
  if (test) j["test"] = json::parse(test->to_json());
  j["config"] = config;
  return j.dump(2);
}

long percent_change(long multi, long single) {
  if (single == 0) return 0;
  return std::lround(100.0 * static_cast<double>(multi - single) / static_cast<double>(single));
}

std::vector<SpeedDelta> compare_speed(const TrainingReport& multi, const TrainingReport& single) {
  std::vector<SpeedDelta> out;
  for (const auto& [task, m] : multi.best_per_task) {
    auto it = single.best_per_task.find(task);
    if (it == single.best_per_task.end()) continue;
    SpeedDelta d;
    d.task = task;
    d.multi_updates = m.updates;
    d.single_updates = it->second.updates;
    d.delta_percent = percent_change(m.updates, it->second.updates);
    d.delta_f1 = 100.0 * (m.f1 - it->second.f1);
    out.push_back(d);
  }
  return out;
}

}  // namespace hmtl
