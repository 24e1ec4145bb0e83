// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "rectidistill/data.hpp"
#include "rectidistill/kernels.hpp"
#include "rectidistill/rng.hpp"

using namespace rectidistill;

namespace {

struct Batch {
  std::vector<LogitVector> z;
  std::vector<ProbVector> t;
  std::vector<OneHotLabel> y;
};

std::vector<double> simplex(Xoshiro256& rng, std::size_t n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) total += v = rng.uniform() + 1e-3;
  for (auto& v : p) v /= total;
  return p;
}

Batch make_batch(std::size_t n, std::size_t classes, bool all_wrong) {
  Xoshiro256 rng(7);
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(classes);
    for (auto& v : z) v = rng.uniform(-3.0, 3.0);
    b.z.emplace_back(std::move(z));
    b.t.emplace_back(simplex(rng, classes));
    std::size_t label = rng.below(classes);
    if (all_wrong && label == argmax(b.t.back().values())) label = (label + 1) % classes;
    b.y.push_back({label});
  }
  return b;
}

template <BatchObjective (*Kernel)(const BatchInputs&)>
void BM_batch_objective(benchmark::State& state) {
  const auto b = make_batch(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), false);
  const BatchInputs in{b.z, b.t, b.y, {5, 10}, 2.0, DistillMode::full(), KdReduction::batch_mean};
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(in));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <std::vector<RectifiedTarget> (*Kernel)(std::span<const ProbVector>, std::span<const OneHotLabel>,
                                                 RectifyStage)>
void BM_rectify_batch(benchmark::State& state) {
  const auto b = make_batch(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), true);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(b.t, b.y, RectifyStage::step_c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <EvalResult (*Kernel)(const MlpParams&, const Dataset&)>
void BM_evaluate(benchmark::State& state) {
  const auto ds = make_blobs(4, static_cast<std::size_t>(state.range(0)) / 4, 2, 1.2, 1);
  const std::vector<std::size_t> dims{2, 64, 4};
  const auto p = init_mlp(dims, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(p, ds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (long n : {32, 1024, 16384}) b->Args({n, 10});
  b->Args({1024, 100});
}

}  // namespace

BENCHMARK(BM_batch_objective<kernels::serial::batch_objective>)->Name("batch_objective/serial")->Apply(shapes);
BENCHMARK(BM_batch_objective<kernels::omp::batch_objective>)->Name("batch_objective/omp")->Apply(shapes);
BENCHMARK(BM_rectify_batch<kernels::serial::rectify_batch>)->Name("rectify_batch/serial")->Apply(shapes);
BENCHMARK(BM_rectify_batch<kernels::omp::rectify_batch>)->Name("rectify_batch/omp")->Apply(shapes);
BENCHMARK(BM_evaluate<kernels::serial::evaluate>)->Name("evaluate/serial")->Arg(800)->Arg(16384);
BENCHMARK(BM_evaluate<kernels::omp::evaluate>)->Name("evaluate/omp")->Arg(800)->Arg(16384);

BENCHMARK_MAIN();
