#include <benchmark/benchmark.h>

#include "pricefusion/models.hpp"
#include "pricefusion/ops.hpp"
#include "pricefusion/rng.hpp"

using namespace pricefusion;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(300);

void BM_Conv2d(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto filters = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_tensor({side, side, 3}, 3), k = random_tensor({3, 3, 3, filters}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, k, 1));
}
BENCHMARK(BM_Conv2d)->Args({32, 16})->Args({128, 16});

void BM_MaxPool(benchmark::State& state) {
  const Tensor x = random_tensor({126, 126, 16}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ops::maxpool2d(x, 2, 2));
}
BENCHMARK(BM_MaxPool);

// Inference over a batch of 32 for each model at the default architecture.
void BM_ModelForward(benchmark::State& state) {
  const int id = static_cast<int>(state.range(0));
  const auto side = static_cast<std::size_t>(state.range(1));
  ModelSpec spec;
  spec.model_id = id;
  spec.tabular_width = 100;
  if (id == 2) spec.embedding_width = 2048;
  if (id >= 3) spec.image_shape = Shape{side, side, 3};
  const ModelGraph<float> model = build_model<float>(spec, 0);
  const Tensor tab = random_tensor({32, 100}, 6);
  Tensor other;
  if (id == 2) other = random_tensor({32, 2048}, 7);
  if (id >= 3) other = random_tensor({32, side, side, 3}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(tab, id >= 2 ? &other : nullptr).probs);
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ModelForward)->Args({1, 0})->Args({2, 0})->Args({3, 64})->Args({4, 64})->Args({5, 64})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
