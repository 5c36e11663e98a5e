#pragma once

// Tiny fixed graphs and seeded random instances shared by the unit tests.

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"

namespace testutil {

using namespace optigap;

inline std::vector<double> feat(std::uint64_t tag) {
  Rng rng(splitmix64(tag));
  std::vector<double> f(kEdgeFeatureDim);
  for (double& x : f) x = rng.uniform(0.0, 1.0);
  return f;
}

inline EdgeSpec edge(int id, std::string from, std::string to,
                     double len = 100.0) {
  EdgeSpec e;
  e.id = id;
  e.from = std::move(from);
  e.to = std::move(to);
  e.length_m = len;
  e.features = feat(std::uint64_t(id));
  return e;
}

inline std::vector<Node> nodes(std::initializer_list<const char*> ids) {
  std::vector<Node> ns;
  for (const char* id : ids) ns.push_back({id, 0.0, 0.0});
  return ns;
}

// a -> b -> c
inline RoadNetwork line3() {
  return build_network(nodes({"a", "b", "c"}),
                       {edge(1, "a", "b"), edge(2, "b", "c")});
}

// two routes a -> d: via b and via c
inline RoadNetwork diamond() {
  return build_network(nodes({"a", "b", "c", "d"}),
                       {edge(1, "a", "b"), edge(2, "b", "d"),
                        edge(3, "a", "c"), edge(4, "c", "d")});
}

// chain v0 -> ... -> v{n-1} plus `extra` random forward shortcuts; acyclic and
// the last node stays reachable from every earlier one
inline RoadNetwork random_dag(int n, int extra, Rng& rng) {
  std::vector<Node> ns;
  for (int i = 0; i < n; ++i) ns.push_back({"v" + std::to_string(i), 0.0, 0.0});
  std::vector<EdgeSpec> es;
  int id = 1;
  for (int i = 0; i + 1 < n; ++i) es.push_back(edge(id++, ns[i].id, ns[i + 1].id));
  for (int k = 0; k < extra; ++k) {
    const int i = int(rng.below(std::uint64_t(n - 1)));
    const int j = i + 1 + int(rng.below(std::uint64_t(n - i - 1)));
    es.push_back(edge(id++, ns[i].id, ns[j].id));
  }
  return build_network(ns, es);
}

inline std::vector<double> rand_costs(int m, Rng& rng) {
  std::vector<double> c(m);
  for (double& x : c) x = rng.uniform(0.1, 10.0);
  return c;
}

inline Matrix rand_phi(int edges, int d, Rng& rng) {
  Matrix phi(edges, d);
  for (double& v : phi.v) v = rng.uniform(-1.0, 1.0);
  return phi;
}

inline double seq_cost(const std::vector<double>& costs, const PathVec& z) {
  double s = 0.0;
  for (int e : z.edge_seq) s += costs[std::size_t(e)];
  return s;
}

}  // namespace testutil
