#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"
#include "optigap/nets.hpp"
#include "optigap/training.hpp"

namespace optigap {

struct WorldConfig {
  int d = 8;                    // hidden embedding dimension
  double rho_true = 0.3;        // drift ball radius; 0 freezes the metric at I
  double drift_epoch_s = 120.0; // seconds between drift anchor draws
  double kappa_opt = 0.9;       // optimistic multiplier, < 1
  double kappa_pess = 1.15;     // pessimistic multiplier, > 1
  double noise_sigma = 0.0;     // lognormal segment-noise scale; 0 disables
  double horizon_s = 604800.0;  // one simulated week
  double median_edge_s = 30.0;  // cost calibration target at time zero
  std::vector<std::string> depot_ids;
};

// Seeded synthetic traffic source. Hidden representation model plus a
// piecewise-linear metric drift path; every reply is a pure function of
// (seed, arguments).
struct TrafficOracle {
  std::uint64_t seed = 0;
  WorldConfig cfg;
  RoadNetwork net;
  RepresentationModel hidden;
  std::vector<Matrix> drift;  // metric anchors at epoch boundaries
  double cost_scale = 1.0;    // raw quadratic cost -> seconds
  std::vector<int> depots;    // node indices of cfg.depot_ids
  std::vector<int> region;    // per node: depot list index, nearest by hops
};

// directed grid road graph with two-way streets and seeded diagonal
// shortcuts; features and coordinates are deterministic in the seed
RoadNetwork generate_network(std::uint64_t seed, int rows, int cols);

TrafficOracle generate_world(std::uint64_t seed, const RoadNetwork& net,
                             const WorldConfig& cfg);

// context vector at a simulated time: 5 weather floats, scaled hour,
// day-of-week one-hot (7), month one-hot (12), 2 holiday flags
std::vector<double> context_at(const TrafficOracle& w, double sim_time);

// ground-truth per-edge seconds at a simulated time (drifted metric applied
// to the hidden embeddings at that time's context)
std::vector<double> costs_at(const TrafficOracle& w, double sim_time);

struct OracleReply {
  std::vector<int> route;  // edge indices, tail to head
  double duration = 0.0;   // predicted seconds for the whole route
  double first_dt = 0.0;   // realized seconds of the first segment
  double optimistic = 0.0;
  double pessimistic = 0.0;
};

OracleReply oracle_query(const TrafficOracle& w, int origin, int dest,
                         double sim_time);

struct SimOutcome {
  double t_final = 0.0;  // exactly the sum of segment times
  std::vector<std::pair<int, double>> segments;  // (edge index, dt)
  int queries = 0;
};

// advance one returned segment per query, re-querying from the new node at
// the drifted simulated time
SimOutcome adaptive_simulate(const TrafficOracle& w, int origin, int dest,
                             double t0);

// follow min{q, len(prefix)} prescribed segments at per-segment oracle
// times, then switch to the adaptive rule
SimOutcome hybrid_simulate(const TrafficOracle& w,
                           const std::vector<int>& prefix, int q, int dest,
                           double t0);

// incident samples: random depot origin, random non-depot destination,
// uniform call times over the horizon, observed time from adaptive_simulate
std::vector<Sample> generate_dataset(const TrafficOracle& w, int n,
                                     std::uint64_t seed);

// world.json holds seed + cfg only; matrices regenerate deterministically
std::string world_to_json(const TrafficOracle& w);
TrafficOracle world_from_json(const std::string& text, const RoadNetwork& net);
TrafficOracle load_world(const std::string& path, const RoadNetwork& net);
void save_world(const TrafficOracle& w, const std::string& path);

}  // namespace optigap
