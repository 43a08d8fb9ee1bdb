#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hmtl/autograd.hpp"
#include "hmtl/config.hpp"
#include "hmtl/metrics.hpp"
#include "hmtl/model.hpp"

namespace hmtl {

enum class SamplingMode { kProportional, kUniform };
SamplingMode parse_sampling_mode(std::string_view name);

// Draws the task of the next update.
class SamplingPolicy {
 public:
  // Throws ConfigError when no task is given or a size is zero.
  SamplingPolicy(SamplingMode mode, std::map<Task, std::size_t> sizes);

  SamplingMode mode() const { return mode_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  double probability(Task task) const;
  Task sample(Rng& rng) const;

 private:
  SamplingMode mode_;
  std::vector<Task> tasks_;
  std::vector<double> probabilities_;
};

// Stops after `patience` evaluations in a row without improvement.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(int patience) : patience_(patience) {}

  // Records one evaluation; returns true when it is a new best.
  bool observe(double metric, long updates);
  // patience 0 stops at the first evaluation without improvement.
  bool converged() const { return stale_ >= std::max(1, patience_); }
  double best() const { return best_; }
  long best_updates() const { return best_updates_; }
  int evaluations() const { return observed_; }

 private:
  int patience_;
  double best_ = -1.0;
  long best_updates_ = 0;
  int stale_ = 0;
  int observed_ = 0;
};

struct SentenceRef {
  int doc = 0;
  int sentence = 0;
  auto operator<=>(const SentenceRef&) const = default;
};

// One sampled mini-batch: sentences for ner/emd/re, one document for cr.
struct TaskBatch {
  Task task = Task::kNer;
  std::vector<SentenceRef> sentences;
  int document = -1;
};

struct TaskDataset {
  std::vector<Document> train;
  std::shared_ptr<const std::vector<Document>> dev;
};

struct TrainingData {
  std::map<Task, TaskDataset> tasks;
  std::shared_ptr<const std::vector<Document>> test;

  // Every training document, each distinct dataset once.
  std::vector<Document> all_training_documents() const;
};

// Reads (or generates) the datasets a config asks for.
TrainingData load_training_data(const RunConfig& config);

struct EvaluationRecord {
  long updates = 0;
  std::map<Task, double> f1;
  double mean = 0.0;
};

struct TaskBest {
  double f1 = 0.0;
  long updates = 0;
};

struct TrainingReport {
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string hierarchy;
  std::vector<Task> tasks;
  std::map<Task, int> encoder_input_dims;
  std::string sampling;
  std::map<Task, double> sampling_probabilities;
  std::map<Task, long> samples;
  long eval_interval = 0;
  long updates = 0;
  long best_updates = 0;
  double best_metric = 0.0;
  bool converged = false;
  std::string stop_reason;
  std::vector<EvaluationRecord> history;
  std::map<Task, TaskBest> best_per_task;
  MetricReport dev;
  std::optional<MetricReport> test;

  // Deterministic JSON (no timing information).
  std::string to_json() const;
};

class Trainer {
 public:
  Trainer(HierarchicalModel& model, TrainingData data, const RunConfig& config);

  const SamplingPolicy& policy() const { return policy_; }
  Task sample_task();
  TaskBatch next_batch(Task task);
  // Forward, backward and one optimizer update. Returns the batch loss.
  double train_step(const TaskBatch& batch);
  // Dev scores of every configured task.
  MetricReport evaluate_dev() const;
  TrainingReport train();

  long updates() const { return updates_; }
  long eval_interval() const { return eval_interval_; }

 private:
  HierarchicalModel& model_;
  TrainingData data_;
  RunConfig config_;
  SamplingPolicy policy_;
  Adam adam_;
  Rng task_rng_;
  Rng batch_rng_;
  Rng dropout_rng_;
  std::map<Task, std::vector<SentenceRef>> units_;
  std::map<Task, std::vector<std::size_t>> order_;
  std::map<Task, std::size_t> cursor_;
  std::map<Task, long> samples_;
  long updates_ = 0;
  long eval_interval_ = 1;
};

struct SpeedDelta {
  Task task = Task::kNer;
  long multi_updates = 0;
  long single_updates = 0;
  long delta_percent = 0;  // rounded (multi - single) / single * 100
  double delta_f1 = 0.0;   // F1 points
};

// Updates-to-best and best dev F1 of every task present in both reports.
std::vector<SpeedDelta> compare_speed(const TrainingReport& multi, const TrainingReport& single);
long percent_change(long multi, long single);

}  // namespace hmtl
