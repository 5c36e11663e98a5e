#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/dca.hpp"
#include "optigap/netgraph.hpp"
#include "optigap/nets.hpp"
#include "optigap/simworld.hpp"

using namespace optigap;

namespace {

// dense symmetric PSD test matrix, seeded for stable comparisons across runs
Matrix random_gram(int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  return matmul(transpose(a), a);
}

void BM_dijkstra_grid(benchmark::State& state) {
  const int side = int(state.range(0));
  const RoadNetwork net = generate_network(7, side, side);
  std::vector<double> costs;
  costs.reserve(std::size_t(net.edge_count()));
  Rng rng(11);
  for (int e = 0; e < net.edge_count(); ++e)
    costs.push_back(rng.uniform(1.0, 100.0));
  const OdSpec od = make_od_indices(net, {0}, net.node_count() - 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dijkstra(net, costs, od));
  }
  state.SetLabel(std::to_string(net.edge_count()) + " edges");
}

void BM_solve_subproblem(benchmark::State& state) {
  const int d = int(state.range(0));
  const Matrix g = random_gram(d, 21);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_subproblem(g, 0.3));
  }
}

void BM_jacobi_eigh(benchmark::State& state) {
  const int d = int(state.range(0));
  const Matrix s = random_gram(d, 22);
  for (auto _ : state) {
    benchmark::DoNotOptimize(jacobi_eigh(s));
  }
}

// one full gap estimate on a grid world; dominated by |E| d^2 embeddings
// per shortest-path call plus the d^3 subproblem solves
void BM_optimistic_gap(benchmark::State& state) {
  const int d = int(state.range(0));
  const RoadNetwork net = generate_network(7, 4, 4);
  const RepresentationModel rep = default_representation(d, 5);
  const std::vector<double> ctx(std::size_t(kContextDim), 0.4);
  const Matrix phi = embed_edges(rep, net, ctx);
  const OdSpec od = make_od_indices(net, {0}, net.node_count() - 1);
  const PathVec z1 = dijkstra(net, edge_costs(phi), od).first;
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimistic_gap(phi, net, od, z1, 0.3));
  }
}

}  // namespace

BENCHMARK(BM_dijkstra_grid)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_solve_subproblem)->Arg(4)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_jacobi_eigh)->Arg(8)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_optimistic_gap)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
