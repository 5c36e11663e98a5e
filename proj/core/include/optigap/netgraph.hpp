#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "optigap/common.hpp"

namespace optigap {

inline constexpr int kEdgeFeatureDim = 20;

struct Node {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
};

// Input form of an edge; endpoints are node ids.
struct EdgeSpec {
  int id = 0;
  std::string from;
  std::string to;
  double length_m = 0.0;
  std::vector<double> features;  // kEdgeFeatureDim entries
};

// Stored form; endpoints are node indices. Edges are kept sorted by id, so
// lexicographic comparison of internal edge indices equals comparison of ids.
struct Edge {
  int id = 0;
  int from = 0;
  int to = 0;
  double length_m = 0.0;
  std::vector<double> features;
};

struct RoadNetwork {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::unordered_map<std::string, int> node_index;

  // out[v] / in[v]: incident edge indices in ascending index (= id) order
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> in;

  // unordered pairs (i < j) of distinct edges sharing at least one endpoint
  std::vector<std::pair<int, int>> adjacent_pairs;

  int node_count() const { return int(nodes.size()); }
  int edge_count() const { return int(edges.size()); }

  int index_of(const std::string& node_id) const;

  // node-arc incidence: column e has +1 at the tail row and -1 at the head row
  Matrix incidence() const;
};

// origins/dest are node indices; dest must not be an origin
struct OdSpec {
  std::vector<int> origins;
  int dest = -1;
};

struct PathVec {
  std::vector<std::uint8_t> z;  // over edges, stored order
  std::vector<int> edge_seq;    // internal edge indices, tail-to-head order
  int origin = -1;              // chosen origin node index
};

RoadNetwork build_network(const std::vector<Node>& nodes,
                          const std::vector<EdgeSpec>& edges);

OdSpec make_od(const RoadNetwork& net, const std::vector<std::string>& origin_ids,
               const std::string& dest_id);
OdSpec make_od_indices(const RoadNetwork& net, std::vector<int> origins, int dest);

// b[chosen_origin] = +1, b[dest] = -1, zeros elsewhere
std::vector<double> od_vector(const RoadNetwork& net, const OdSpec& od,
                              int chosen_origin);

// Minimum-cost simple path from the best origin to od.dest under nonnegative
// per-edge costs. Ties are resolved by the total order "cost, then
// lexicographic edge-id sequence", so identical inputs always return the
// identical path. The returned value re-accumulates costs along the path in
// tail-to-head order.
std::pair<PathVec, double> dijkstra(const RoadNetwork& net,
                                    const std::vector<double>& costs,
                                    const OdSpec& od);

// Distance from every node to od.dest under the given costs (reverse
// Dijkstra); unreachable nodes get +infinity.
std::vector<double> dist_to_dest(const RoadNetwork& net,
                                 const std::vector<double>& costs, int dest);

// All simple origin->dest paths; guarded to |E| <= 32. Deterministic order:
// sorted lexicographically by edge sequence.
std::vector<PathVec> enumerate_simple_paths(const RoadNetwork& net,
                                            const OdSpec& od);

// JSON round trip (schema: {"nodes":[{"id","lat","lon"}],
// "edges":[{"id","from","to","length_m","features":[...]}]})
RoadNetwork network_from_json(const std::string& text);
std::string network_to_json(const RoadNetwork& net);
RoadNetwork load_network(const std::string& path);
void save_network(const RoadNetwork& net, const std::string& path);

}  // namespace optigap
