#include <benchmark/benchmark.h>

#include <random>

#include "kmp/eval/metrics.hpp"
#include "kmp/graph_conv.hpp"
#include "kmp/model/dataset.hpp"
#include "kmp/model/kmpnet.hpp"
#include "kmp/skeleton_graph.hpp"

namespace {

using namespace kmp;

Tensor random(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = normal(rng);
  return Tensor(std::move(shape), std::move(data));
}

void BM_GcnBlock(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto adj = adjacency(build_graph(coco_body_topology(false), frames, GraphMode::kBoth));
  ParameterStore store;
  const GcnBlock block = make_gcn_block(store, "b", kNodeDim, kMlpHidden, 0.1, 1);
  const Tensor h = random({frames * 12, kNodeDim}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(gcn_block_forward(h, adj, block, false, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames * 12));
}
BENCHMARK(BM_GcnBlock)->Arg(1)->Arg(8)->Arg(32);

void BM_SoftmaxAggregate(benchmark::State& state) {
  const auto adj = adjacency(build_graph(coco_body_topology(false), 8, GraphMode::kBoth));
  const Tensor m = random({96, kNodeDim}, 3);
  const Tensor tau = Tensor::scalar(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_aggregate(m, adj, tau));
}
BENCHMARK(BM_SoftmaxAggregate);

// One inference pass over a default-sized tracklet (8 frames of 64x32).
void BM_KmpNetForward(benchmark::State& state) {
  const bool graph = state.range(0) != 0;
  ModelConfig config;
  config.graph_branch = graph;
  config.n_classes = 32;
  const KmpNet net(config, 4);
  SyntheticOptions options;
  options.n_identities = 2;
  options.tracklets_per_id = 1;
  const Dataset data = generate_synthetic_dataset(options);
  const Tensor frames = data.frames_tensor(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(frames, data.tracklets[0].track, false, 0, graph));
  }
}
BENCHMARK(BM_KmpNetForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CmcAndMap(benchmark::State& state) {
  const auto q_count = static_cast<std::size_t>(state.range(0));
  const std::size_t g_count = 4 * q_count;
  std::mt19937_64 rng(5);
  std::vector<EmbeddingMeta> queries, gallery;
  for (std::size_t q = 0; q < q_count; ++q) queries.push_back({g_count + q, q, 0});
  for (std::size_t g = 0; g < g_count; ++g) gallery.push_back({g, g % q_count, 1});
  DistanceMatrix dist{q_count, g_count, {}};
  std::uniform_real_distribution<double> uniform(0.0, 2.0);
  for (std::size_t i = 0; i < q_count * g_count; ++i) dist.values.push_back(uniform(rng));
  for (auto _ : state) benchmark::DoNotOptimize(cmc_and_map(dist, queries, gallery));
}
BENCHMARK(BM_CmcAndMap)->Arg(32)->Arg(256);

}  // namespace
