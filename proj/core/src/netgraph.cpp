#include "optigap/netgraph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace optigap {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int RoadNetwork::index_of(const std::string& node_id) const {
  auto it = node_index.find(node_id);
  if (it == node_index.end()) throw UnknownNode("unknown node id: " + node_id);
  return it->second;
}

Matrix RoadNetwork::incidence() const {
  Matrix a(node_count(), edge_count());
  for (int e = 0; e < edge_count(); ++e) {
    a(edges[e].from, e) = 1.0;
    a(edges[e].to, e) = -1.0;
  }
  return a;
}

RoadNetwork build_network(const std::vector<Node>& nodes,
                          const std::vector<EdgeSpec>& edges) {
  RoadNetwork net;
  net.nodes = nodes;
  for (int i = 0; i < int(nodes.size()); ++i) {
    if (!net.node_index.emplace(nodes[i].id, i).second)
      throw DuplicateId("duplicate node id: " + nodes[i].id);
  }

  std::set<int> edge_ids;
  for (const EdgeSpec& es : edges) {
    if (!edge_ids.insert(es.id).second)
      throw DuplicateId("duplicate edge id: " + std::to_string(es.id));
    auto from = net.node_index.find(es.from);
    auto to = net.node_index.find(es.to);
    if (from == net.node_index.end())
      throw DanglingEndpoint("edge " + std::to_string(es.id) +
                             " references missing node: " + es.from);
    if (to == net.node_index.end())
      throw DanglingEndpoint("edge " + std::to_string(es.id) +
                             " references missing node: " + es.to);
    if (!(es.length_m > 0.0))
      throw NonpositiveLength("edge " + std::to_string(es.id) +
                              " has nonpositive length");
    if (from->second == to->second)
      throw Error("self-loop rejected: edge " + std::to_string(es.id));
    if (int(es.features.size()) != kEdgeFeatureDim)
      throw DimMismatch("edge " + std::to_string(es.id) + " has " +
                        std::to_string(es.features.size()) +
                        " features, expected " + std::to_string(kEdgeFeatureDim));
    net.edges.push_back(Edge{es.id, from->second, to->second, es.length_m,
                             es.features});
  }
  std::sort(net.edges.begin(), net.edges.end(),
            [](const Edge& a, const Edge& b) { return a.id < b.id; });

  net.out.assign(net.node_count(), {});
  net.in.assign(net.node_count(), {});
  for (int e = 0; e < net.edge_count(); ++e) {
    net.out[net.edges[e].from].push_back(e);
    net.in[net.edges[e].to].push_back(e);
  }

  // incident-edge buckets per node; every unordered adjacent pair shows up
  // in at least one bucket
  std::set<std::pair<int, int>> pairs;
  std::vector<std::vector<int>> touching(net.node_count());
  for (int e = 0; e < net.edge_count(); ++e) {
    touching[net.edges[e].from].push_back(e);
    touching[net.edges[e].to].push_back(e);
  }
  for (const auto& bucket : touching)
    for (std::size_t i = 0; i < bucket.size(); ++i)
      for (std::size_t j = i + 1; j < bucket.size(); ++j) {
        int a = bucket[i], b = bucket[j];
        if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
      }
  net.adjacent_pairs.assign(pairs.begin(), pairs.end());
  return net;
}

OdSpec make_od_indices(const RoadNetwork& net, std::vector<int> origins, int dest) {
  if (origins.empty()) throw Error("od spec needs at least one origin");
  std::sort(origins.begin(), origins.end());
  origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
  for (int o : origins)
    if (o < 0 || o >= net.node_count())
      throw UnknownNode("origin index out of range: " + std::to_string(o));
  if (dest < 0 || dest >= net.node_count())
    throw UnknownNode("dest index out of range: " + std::to_string(dest));
  if (std::binary_search(origins.begin(), origins.end(), dest))
    throw Error("od spec rejects dest among origins");
  return OdSpec{std::move(origins), dest};
}

OdSpec make_od(const RoadNetwork& net, const std::vector<std::string>& origin_ids,
               const std::string& dest_id) {
  std::vector<int> origins;
  origins.reserve(origin_ids.size());
  for (const std::string& s : origin_ids) origins.push_back(net.index_of(s));
  return make_od_indices(net, std::move(origins), net.index_of(dest_id));
}

std::vector<double> od_vector(const RoadNetwork& net, const OdSpec& od,
                              int chosen_origin) {
  if (!std::count(od.origins.begin(), od.origins.end(), chosen_origin))
    throw UnknownNode("chosen origin is not in the od spec: " +
                      std::to_string(chosen_origin));
  std::vector<double> b(net.node_count(), 0.0);
  b[chosen_origin] = 1.0;
  b[od.dest] = -1.0;
  return b;
}

std::vector<double> dist_to_dest(const RoadNetwork& net,
                                 const std::vector<double>& costs, int dest) {
  if (int(costs.size()) != net.edge_count())
    throw DimMismatch("cost vector size does not match edge count");
  for (double c : costs)
    if (!(c >= 0.0)) throw Error("negative or non-finite edge cost");

  std::vector<double> dist(net.node_count(), kInf);
  dist[dest] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.emplace(0.0, dest);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (int e : net.in[v]) {
      const int u = net.edges[e].from;
      const double nd = costs[e] + dist[v];
      if (nd < dist[u]) {
        dist[u] = nd;
        heap.emplace(nd, u);
      }
    }
  }
  return dist;
}

namespace {

// First dest-reaching walk in smallest-edge-first DFS order over tight edges
// (dist[v] == costs[e] + dist[head], exact). That walk is the
// lexicographically smallest simple shortest path from `start`. Backtracking
// only ever happens when zero-cost cycles make the tight subgraph cyclic.
bool lex_dfs(const RoadNetwork& net, const std::vector<double>& costs,
             const std::vector<double>& dist, int v, int dest,
             std::vector<std::uint8_t>& on_stack, std::vector<int>& seq) {
  if (v == dest) return true;
  on_stack[v] = 1;
  for (int e : net.out[v]) {
    const int w = net.edges[e].to;
    if (on_stack[w] || dist[w] == kInf) continue;
    if (costs[e] + dist[w] != dist[v]) continue;
    seq.push_back(e);
    if (lex_dfs(net, costs, dist, w, dest, on_stack, seq)) {
      on_stack[v] = 0;
      return true;
    }
    seq.pop_back();
  }
  on_stack[v] = 0;
  return false;
}

PathVec path_from_seq(const RoadNetwork& net, std::vector<int> seq, int origin) {
  PathVec p;
  p.z.assign(net.edge_count(), 0);
  for (int e : seq) p.z[e] = 1;
  p.edge_seq = std::move(seq);
  p.origin = origin;
  return p;
}

}  // namespace

std::pair<PathVec, double> dijkstra(const RoadNetwork& net,
                                    const std::vector<double>& costs,
                                    const OdSpec& od) {
  const std::vector<double> dist = dist_to_dest(net, costs, od.dest);

  double best = kInf;
  for (int o : od.origins) best = std::min(best, dist[o]);
  if (best == kInf) throw Unreachable("destination unreachable from every origin");

  // Among min-cost origins, the lexicographically smallest edge sequence wins.
  // Distinct origins cannot produce the same first edge, so comparison of the
  // per-origin minimal sequences is a strict total order.
  std::vector<int> best_seq;
  int best_origin = -1;
  for (int o : od.origins) {
    if (dist[o] != best) continue;
    std::vector<std::uint8_t> on_stack(net.node_count(), 0);
    std::vector<int> seq;
    if (!lex_dfs(net, costs, dist, o, od.dest, on_stack, seq)) continue;
    if (best_origin < 0 || seq < best_seq) {
      best_seq = std::move(seq);
      best_origin = o;
    }
  }
  if (best_origin < 0) throw Unreachable("no simple shortest path found");

  double value = 0.0;
  for (int e : best_seq) value += costs[e];
  return {path_from_seq(net, std::move(best_seq), best_origin), value};
}

namespace {

void enum_dfs(const RoadNetwork& net, int v, int dest,
              std::vector<std::uint8_t>& on_stack, std::vector<int>& seq,
              int origin, std::vector<PathVec>& out) {
  if (v == dest) {
    out.push_back(path_from_seq(net, seq, origin));
    return;
  }
  on_stack[v] = 1;
  for (int e : net.out[v]) {
    const int w = net.edges[e].to;
    if (on_stack[w]) continue;
    seq.push_back(e);
    enum_dfs(net, w, dest, on_stack, seq, origin, out);
    seq.pop_back();
  }
  on_stack[v] = 0;
}

}  // namespace

std::vector<PathVec> enumerate_simple_paths(const RoadNetwork& net,
                                            const OdSpec& od) {
  if (net.edge_count() > 32)
    throw TooLarge("enumerate_simple_paths is limited to 32 edges, got " +
                   std::to_string(net.edge_count()));
  std::vector<PathVec> out;
  for (int o : od.origins) {
    std::vector<std::uint8_t> on_stack(net.node_count(), 0);
    std::vector<int> seq;
    enum_dfs(net, o, od.dest, on_stack, seq, o, out);
  }
  std::sort(out.begin(), out.end(), [](const PathVec& a, const PathVec& b) {
    return a.edge_seq < b.edge_seq;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const PathVec& a, const PathVec& b) {
                          return a.edge_seq == b.edge_seq;
                        }),
            out.end());
  return out;
}

RoadNetwork network_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::vector<Node> nodes;
  for (const auto& n : j.at("nodes"))
    nodes.push_back(Node{n.at("id").get<std::string>(),
                         n.value("lat", 0.0), n.value("lon", 0.0)});
  std::vector<EdgeSpec> edges;
  for (const auto& e : j.at("edges")) {
    EdgeSpec es;
    es.id = e.at("id").get<int>();
    es.from = e.at("from").get<std::string>();
    es.to = e.at("to").get<std::string>();
    es.length_m = e.at("length_m").get<double>();
    es.features = e.at("features").get<std::vector<double>>();
    edges.push_back(std::move(es));
  }
  return build_network(nodes, edges);
}

std::string network_to_json(const RoadNetwork& net) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const Node& n : net.nodes)
    j["nodes"].push_back({{"id", n.id}, {"lat", n.lat}, {"lon", n.lon}});
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : net.edges)
    j["edges"].push_back({{"id", e.id},
                          {"from", net.nodes[e.from].id},
                          {"to", net.nodes[e.to].id},
                          {"length_m", e.length_m},
                          {"features", e.features}});
  return j.dump(2);
}

RoadNetwork load_network(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open network file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return network_from_json(ss.str());
}

void save_network(const RoadNetwork& net, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write network file: " + path);
  f << network_to_json(net) << "\n";
}

}  // namespace optigap
