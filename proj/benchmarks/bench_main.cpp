#include <benchmark/benchmark.h>

#include "hmtl/crf.hpp"
#include "hmtl/encoder.hpp"
#include "hmtl/trainer.hpp"

namespace hmtl {
namespace {

Matrix random(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

CrfWeights random_weights(int k, Rng& rng) {
  return {random(k, k, rng), random(1, k, rng), random(1, k, rng)};
}

// Args: sentence length, tag count (17 = 4 labels in BILOU).
void BM_CrfLogPartition(benchmark::State& state) {
  Rng rng(1);
  const int n = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const Matrix e = random(n, k, rng);
  const CrfWeights w = random_weights(k, rng);
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(e, w));
}
BENCHMARK(BM_CrfLogPartition)->Args({20, 17})->Args({50, 17})->Args({50, 73});

void BM_CrfViterbi(benchmark::State& state) {
  Rng rng(2);
  const int n = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  const Matrix e = random(n, k, rng);
  const CrfWeights w = random_weights(k, rng);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(e, w));
}
BENCHMARK(BM_CrfViterbi)->Args({20, 17})->Args({50, 17})->Args({50, 73});

// Args: sentence length, hidden size.
void BM_EncoderForward(benchmark::State& state) {
  Rng rng(3);
  ParameterStore store;
  const int n = static_cast<int>(state.range(0)), h = static_cast<int>(state.range(1));
  const auto enc = BiRecurrentEncoder::create(store, "e", Group::kNer, 100, h, 1, rng);
  const Matrix x = random(n, 100, rng);
  for (auto _ : state) benchmark::DoNotOptimize(encode(enc, x));
}
BENCHMARK(BM_EncoderForward)->Args({20, 32})->Args({20, 64})->Args({50, 64});

// One optimizer update of a desk-scale model per iteration.
void BM_TrainStep(benchmark::State& state, const char* setup) {
  RunConfig c;
  apply_override(c, std::string("setup=") + setup);
  c.model.hidden = 32;
  c.model.dropout = 0.0;
  c.data.synthetic_docs = 20;
  c.data.seed = 3;
  TrainingData data = load_training_data(c);
  HierarchicalModel model = HierarchicalModel::build(c.model, data.all_training_documents(), c.seed);
  Trainer trainer(model, std::move(data), c);
  for (auto _ : state) {
    const Task task = trainer.sample_task();
    benchmark::DoNotOptimize(trainer.train_step(trainer.next_batch(task)));
  }
}
BENCHMARK_CAPTURE(BM_TrainStep, ner, "B")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, coref, "E")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, full, "A")->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace hmtl

BENCHMARK_MAIN();
