#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "optigap/netgraph.hpp"
#include "optigap/reference.hpp"
#include "test_util.hpp"

using namespace optigap;
using namespace testutil;

TEST_CASE("incidence columns have +1 at the tail and -1 at the head") {
  const RoadNetwork net = line3();
  const Matrix a = net.incidence();
  REQUIRE(a.rows == 3);
  REQUIRE(a.cols == 2);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(1, 0) == -1.0);
  CHECK(a(2, 0) == 0.0);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 1) == 1.0);
  CHECK(a(2, 1) == -1.0);
}

TEST_CASE("network construction rejects malformed inputs") {
  const auto ns = nodes({"a", "b"});
  CHECK_THROWS_AS(build_network(ns, {edge(1, "a", "b", 0.0)}), NonpositiveLength);
  CHECK_THROWS_AS(build_network(ns, {edge(1, "a", "b", -3.0)}), NonpositiveLength);
  CHECK_THROWS_AS(build_network(ns, {edge(1, "a", "b"), edge(1, "b", "a")}),
                  DuplicateId);
  CHECK_THROWS_AS(build_network(ns, {edge(1, "a", "zzz")}), DanglingEndpoint);
  CHECK_THROWS_AS(build_network(ns, {edge(1, "a", "a")}), Error);
  EdgeSpec short_features = edge(1, "a", "b");
  short_features.features.pop_back();
  CHECK_THROWS_AS(build_network(ns, {short_features}), DimMismatch);
}

TEST_CASE("incidence of a 50-node random graph has exactly 2|E| nonzeros") {
  Rng rng(11);
  const RoadNetwork net = random_dag(50, 30, rng);
  const Matrix a = net.incidence();
  int nz = 0;
  for (double v : a.v) nz += (v != 0.0);
  CHECK(nz == 2 * net.edge_count());
}

TEST_CASE("od vector marks the chosen origin +1 and the destination -1") {
  const RoadNetwork net = line3();
  const OdSpec od = make_od(net, {"a"}, "c");
  const std::vector<double> b = od_vector(net, od, net.index_of("a"));
  REQUIRE(b.size() == 3);
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 0.0);
  CHECK(b[2] == -1.0);
}

TEST_CASE("od vector has exactly two nonzeros on a larger instance") {
  Rng rng(13);
  const RoadNetwork net = random_dag(10, 6, rng);
  const OdSpec od = make_od(net, {"v0", "v2"}, "v9");
  const std::vector<double> b = od_vector(net, od, net.index_of("v2"));
  int nz = 0;
  for (double v : b) nz += (v != 0.0);
  CHECK(nz == 2);
  CHECK_THROWS_AS(od_vector(net, od, net.index_of("v5")), UnknownNode);
}

TEST_CASE("od construction rejects the destination among the origins") {
  const RoadNetwork net = line3();
  CHECK_THROWS_AS(make_od(net, {"a", "c"}, "c"), Error);
  CHECK_THROWS_AS(make_od(net, {"a"}, "nope"), UnknownNode);
}

TEST_CASE("dijkstra accumulates cost 3 on a two-edge line") {
  const RoadNetwork net = line3();
  const auto [path, value] = dijkstra(net, {1.0, 2.0}, make_od(net, {"a"}, "c"));
  CHECK(value == 3.0);
  REQUIRE(path.edge_seq.size() == 2);
  CHECK(net.edges[std::size_t(path.edge_seq[0])].id == 1);
  CHECK(net.edges[std::size_t(path.edge_seq[1])].id == 2);
  CHECK(path.origin == net.index_of("a"));
}

TEST_CASE("equal-cost parallel edges resolve to the smaller edge id") {
  const RoadNetwork net =
      build_network(nodes({"a", "b"}), {edge(7, "a", "b"), edge(3, "a", "b")});
  const auto [path, value] = dijkstra(net, {2.5, 2.5}, make_od(net, {"a"}, "b"));
  REQUIRE(path.edge_seq.size() == 1);
  CHECK(net.edges[std::size_t(path.edge_seq[0])].id == 3);
  CHECK(value == 2.5);
}

TEST_CASE("dijkstra value equals the label-correcting reference exactly") {
  Rng rng(2026);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6 + int(rng.below(20));
    const RoadNetwork net = random_dag(n, n, rng);
    const std::vector<double> costs = rand_costs(net.edge_count(), rng);
    const OdSpec od = make_od(net, {"v0"}, "v" + std::to_string(n - 1));
    const auto [pd, vd] = dijkstra(net, costs, od);
    const auto [pb, vb] = bellman_ford(net, costs, od);
    CHECK(vd == vb);
    CHECK(pd.edge_seq == pb.edge_seq);
  }
}

TEST_CASE("every enumerated path costs at least the dijkstra value") {
  Rng rng(7);
  const RoadNetwork net = diamond();
  const std::vector<double> costs = rand_costs(net.edge_count(), rng);
  const OdSpec od = make_od(net, {"a"}, "d");
  const double v = dijkstra(net, costs, od).second;
  for (const PathVec& z : enumerate_simple_paths(net, od)) {
    CHECK(seq_cost(costs, z) >= v - 1e-12);
  }
}

TEST_CASE("dijkstra output satisfies the flow constraints of its od vector") {
  Rng rng(5);
  const RoadNetwork net = random_dag(12, 10, rng);
  const std::vector<double> costs = rand_costs(net.edge_count(), rng);
  const OdSpec od = make_od(net, {"v0", "v3"}, "v11");
  const auto [z, v] = dijkstra(net, costs, od);
  REQUIRE(z.z.size() == std::size_t(net.edge_count()));
  const Matrix a = net.incidence();
  const std::vector<double> b = od_vector(net, od, z.origin);
  for (int r = 0; r < a.rows; ++r) {
    double flow = 0.0;
    for (int e = 0; e < a.cols; ++e) flow += a(r, e) * double(z.z[std::size_t(e)]);
    CHECK(flow == b[std::size_t(r)]);
  }
}

TEST_CASE("multi-origin queries return a real origin, never a helper node") {
  Rng rng(17);
  const RoadNetwork net = random_dag(9, 5, rng);
  const OdSpec od = make_od(net, {"v0", "v4", "v6"}, "v8");
  const auto [z, v] = dijkstra(net, rand_costs(net.edge_count(), rng), od);
  CHECK(std::count(od.origins.begin(), od.origins.end(), z.origin) == 1);
  for (int e : z.edge_seq) {
    CHECK(e >= 0);
    CHECK(e < net.edge_count());
  }
}

TEST_CASE("identical inputs give identical paths") {
  Rng rng(19);
  const RoadNetwork net = random_dag(15, 12, rng);
  const std::vector<double> costs = rand_costs(net.edge_count(), rng);
  const OdSpec od = make_od(net, {"v0"}, "v14");
  const auto run1 = dijkstra(net, costs, od);
  const auto run2 = dijkstra(net, costs, od);
  CHECK(run1.first.edge_seq == run2.first.edge_seq);
  CHECK(run1.second == run2.second);
}

TEST_CASE("an unreachable destination is reported, not silently dropped") {
  const RoadNetwork net =
      build_network(nodes({"a", "b", "c"}), {edge(1, "b", "c")});
  CHECK_THROWS_AS(dijkstra(net, {1.0}, make_od(net, {"a"}, "c")), Unreachable);
}

// DFS over out-edges; parallel edges yield distinct paths, matching the
// enumeration's edge-sequence identity
static int dfs_count(const RoadNetwork& net, int node, int dest,
                     std::vector<char>& seen) {
  if (node == dest) return 1;
  seen[std::size_t(node)] = 1;
  int total = 0;
  for (int e : net.out[std::size_t(node)]) {
    const int next = net.edges[std::size_t(e)].to;
    if (!seen[std::size_t(next)]) total += dfs_count(net, next, dest, seen);
  }
  seen[std::size_t(node)] = 0;
  return total;
}

TEST_CASE("path enumeration counts match an independent recount") {
  const RoadNetwork line = line3();
  CHECK(enumerate_simple_paths(line, make_od(line, {"a"}, "c")).size() == 1);

  const RoadNetwork dia = diamond();
  CHECK(enumerate_simple_paths(dia, make_od(dia, {"a"}, "d")).size() == 2);

  Rng rng(23);
  const RoadNetwork net = random_dag(6, 5, rng);
  const OdSpec od = make_od(net, {"v0"}, "v5");
  std::vector<char> seen(std::size_t(net.node_count()), 0);
  const int recount = dfs_count(net, net.index_of("v0"), od.dest, seen);
  CHECK(int(enumerate_simple_paths(net, od).size()) == recount);
}

TEST_CASE("path enumeration refuses oversized graphs") {
  Rng rng(29);
  const RoadNetwork net = random_dag(20, 14, rng);  // 33 edges
  REQUIRE(net.edge_count() == 33);
  CHECK_THROWS_AS(enumerate_simple_paths(net, make_od(net, {"v0"}, "v19")),
                  TooLarge);
}

TEST_CASE("network json round trip preserves the byte image") {
  Rng rng(3);
  const RoadNetwork net = random_dag(8, 5, rng);
  const std::string j1 = network_to_json(net);
  const RoadNetwork back = network_from_json(j1);
  CHECK(network_to_json(back) == j1);
  CHECK(back.node_count() == net.node_count());
  CHECK(back.edge_count() == net.edge_count());
  for (int e = 0; e < net.edge_count(); ++e) {
    CHECK(back.edges[std::size_t(e)].features == net.edges[std::size_t(e)].features);
  }
}
