#include <benchmark/benchmark.h>

#include <random>

#include "duckling/evaluation.hpp"
#include "duckling/network.hpp"
#include "duckling/outlier_engine.hpp"

using namespace duckling;

namespace {

ContextSet make_context(std::size_t n, std::size_t d) {
  std::mt19937_64 rng(n * 131 + d);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  ContextSet ctx{"P", "torso", {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    Embedding e(d);
    for (double& v : e) v = u(rng);
    ctx.lesions.push_back({"L" + std::to_string(i), "P", "torso", e, std::nullopt});
    ctx.record_index.push_back(i);
  }
  return ctx;
}

}  // namespace

static void BM_CosineMatrix(benchmark::State& state) {
  auto ctx = make_context(static_cast<std::size_t>(state.range(0)), 1280);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_distance_matrix(ctx));
}
BENCHMARK(BM_CosineMatrix)->Arg(6)->Arg(16)->Arg(64);

static void BM_ScoreContext(benchmark::State& state) {
  auto ctx = make_context(static_cast<std::size_t>(state.range(0)), 1280);
  for (auto _ : state) benchmark::DoNotOptimize(score_context(ctx));
}
BENCHMARK(BM_ScoreContext)->Arg(16)->Arg(64);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  auto params = ModelParams::init(d, 64, 32, 1);
  Embedding x(d, 0.5);
  for (auto _ : state) {
    auto trace = forward(params, x, 0.7);
    benchmark::DoNotOptimize(backward(params, trace, 1, FocalParams{}));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(1280);

static void BM_RocAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> y(n);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 3 == 0;
    s[i] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(roc_curve(y, s)));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
