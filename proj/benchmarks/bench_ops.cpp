#include <benchmark/benchmark.h>

#include <random>

#include "kmp/numerics/ops.hpp"
#include "kmp/numerics/tensor.hpp"

namespace {

using namespace kmp;

Tensor random(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = normal(rng);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

void BM_Linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random({n, 64}, 1), w = random({64, 128}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ops::linear(x, w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 128));
}
BENCHMARK(BM_Linear)->Arg(96)->Arg(384)->Arg(1536);

void BM_LinearBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random({n, 64}, 1, true), w = random({64, 128}, 2, true);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::linear(x, w)));
  }
}
BENCHMARK(BM_LinearBackward)->Arg(96)->Arg(1536);

// Frame-sized convolutions as they appear in the backbone stages.
void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  const Tensor x = random({8, c, size, size / 2}, 3), w = random({2 * c, c, 3, 3}, 4);
  const Tensor b = random({2 * c}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, &b, 1, 1));
}
BENCHMARK(BM_Conv2d)->Args({3, 64})->Args({8, 32})->Args({32, 8});

void BM_Conv2dBackward(benchmark::State& state) {
  const Tensor x = random({8, 8, 32, 16}, 3, true), w = random({16, 8, 3, 3}, 4, true);
  const Tensor b = random({16}, 5, true);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::conv2d(x, w, &b, 1, 1)));
  }
}
BENCHMARK(BM_Conv2dBackward);

}  // namespace
