// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels: heuristic scoring, MLP forward, Hits@K.
#include <benchmark/benchmark.h>

#include <random>

#include "fixtures.hpp"
#include "linkdistill/heuristics.hpp"
#include "linkdistill/metrics.hpp"
#include "linkdistill/nn.hpp"

using namespace linkdistill;

namespace {

const fixtures::FeaturedGraph& graph() {
  static const auto fg = fixtures::featured_graph(2000, 512, 3);
  return fg;
}

std::vector<Edge> random_pairs(std::size_t n, std::size_t count) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  std::vector<Edge> out;
  while (out.size() < count) {
    const NodeId a = node(rng), b = node(rng);
    if (a != b) out.emplace_back(a, b);
  }
  return out;
}

HeuristicKind kind_of(std::int64_t k) {
  return k == 0 ? HeuristicKind::cn() : k == 1 ? HeuristicKind::aa() : HeuristicKind::csp(6);
}

void BM_ScoreSerial(benchmark::State& st) {
  const auto& g = graph().graph;
  const auto pairs = random_pairs(g.num_nodes(), 20000);
  const auto kind = kind_of(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(score_batch_serial(g, pairs, kind));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pairs.size()));
}

void BM_ScoreParallel(benchmark::State& st) {
  const auto& g = graph().graph;
  const auto pairs = random_pairs(g.num_nodes(), 20000);
  const auto kind = kind_of(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(score_batch(g, pairs, kind));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(pairs.size()));
}

struct MlpFixture {
  Mlp net;
  std::vector<float> input;
  std::size_t rows = 1024;
  MlpFixture() {
    std::mt19937_64 rng(7);
    net = Mlp::kaiming({512, 256, 256}, rng);
    const auto& x = graph().features;
    input.assign(x.values().begin(), x.values().begin() + static_cast<std::ptrdiff_t>(rows * 512));
  }
};

void BM_MlpForwardReference(benchmark::State& st) {
  static const MlpFixture f;
  for (auto _ : st)
    benchmark::DoNotOptimize(reference::mlp_forward_batch<float>(f.net, f.input, f.rows));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.rows));
}

void BM_MlpForwardBatch(benchmark::State& st) {
  static const MlpFixture f;
  MlpActivations<float> acts;
  for (auto _ : st) {
    mlp_forward_batch(f.net, std::span<const float>(f.input), f.rows, acts);
    benchmark::DoNotOptimize(acts.layers.back().data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.rows));
}

void BM_HitsAtK(benchmark::State& st) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> pos(200000), neg(200000);
  for (auto& v : pos) v = u(rng);
  for (auto& v : neg) v = u(rng);
  for (auto _ : st) benchmark::DoNotOptimize(hits_at_k(pos, neg, 20));
}

}  // namespace

BENCHMARK(BM_ScoreSerial)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreParallel)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MlpForwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MlpForwardBatch)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HitsAtK)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
