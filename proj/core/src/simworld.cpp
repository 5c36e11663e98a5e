#include "optigap/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "optigap/scenario.hpp"

namespace optigap {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

std::uint64_t time_bits(double t) {
  std::uint64_t b;
  std::memcpy(&b, &t, sizeof b);
  return b;
}

// deterministic standard normal from a hash of (seed, edge, time)
double hashed_normal(std::uint64_t seed, int edge, double t) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(std::uint64_t(edge) + 1) ^
                               splitmix64(time_bits(t)));
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(a);
  const double u1 = (double(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = double(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double segment_noise(const TrafficOracle& w, int edge, double t) {
  if (w.cfg.noise_sigma <= 0.0) return 1.0;
  const double s = w.cfg.noise_sigma;
  // mean-one lognormal keeps realized times unbiased
  return std::exp(s * hashed_normal(w.seed ^ 0x6e6f697365ULL, edge, t) -
                  0.5 * s * s);
}

Matrix drift_at(const TrafficOracle& w, double sim_time) {
  if (w.drift.empty()) return Matrix::identity(w.cfg.d);
  const double t = std::max(0.0, sim_time);
  const double pos = t / w.cfg.drift_epoch_s;
  const std::size_t k =
      std::min(std::size_t(pos), w.drift.size() - 1);
  if (k + 1 >= w.drift.size()) return w.drift.back();
  const double f = pos - double(k);
  // the ball is convex, so the interpolant stays feasible
  return (1.0 - f) * w.drift[k] + f * w.drift[k + 1];
}

std::vector<int> nearest_depot_by_hops(const RoadNetwork& net,
                                       const std::vector<int>& depots) {
  const int n = net.node_count();
  std::vector<int> hops(std::size_t(n), -1);
  std::vector<int> owner(std::size_t(n), -1);
  std::deque<int> queue;
  for (std::size_t i = 0; i < depots.size(); ++i) {
    const int v = depots[i];
    if (owner[std::size_t(v)] != -1) continue;
    hops[std::size_t(v)] = 0;
    owner[std::size_t(v)] = int(i);
    queue.push_back(v);
  }
  // multi-source BFS over the undirected view; on equal hops the smaller
  // depot index wins because sources are seeded in list order
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    auto relax = [&](int u) {
      if (owner[std::size_t(u)] == -1) {
        owner[std::size_t(u)] = owner[std::size_t(v)];
        hops[std::size_t(u)] = hops[std::size_t(v)] + 1;
        queue.push_back(u);
      }
    };
    for (int e : net.out[std::size_t(v)]) relax(net.edges[std::size_t(e)].to);
    for (int e : net.in[std::size_t(v)]) relax(net.edges[std::size_t(e)].from);
  }
  for (int v = 0; v < n; ++v)
    if (owner[std::size_t(v)] == -1) owner[std::size_t(v)] = 0;
  return owner;
}

}  // namespace

RoadNetwork generate_network(std::uint64_t seed, int rows, int cols) {
  if (rows < 2 || cols < 2) throw Error("grid needs at least 2x2 nodes");
  Rng rng = Rng(seed).child(seedtag::world);

  std::vector<Node> nodes;
  auto name = [&](int r, int c) {
    return "n" + std::to_string(r) + "_" + std::to_string(c);
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      Node nd;
      nd.id = name(r, c);
      nd.lat = 22.28 + 0.004 * r + 0.0004 * rng.uniform();
      nd.lon = 114.15 + 0.004 * c + 0.0004 * rng.uniform();
      nodes.push_back(std::move(nd));
    }

  std::vector<EdgeSpec> edges;
  int next_id = 1;
  auto add_street = [&](int r1, int c1, int r2, int c2) {
    const double length = 180.0 + 240.0 * rng.uniform();
    const double speed = 30.0 + 50.0 * rng.uniform();  // km/h
    for (int dir = 0; dir < 2; ++dir) {
      EdgeSpec e;
      e.id = next_id++;
      e.from = dir == 0 ? name(r1, c1) : name(r2, c2);
      e.to = dir == 0 ? name(r2, c2) : name(r1, c1);
      e.length_m = length;
      e.features.assign(std::size_t(kEdgeFeatureDim), 0.0);
      // pre-scaled: length in km, speed/100, small counts/4, rest in [0,1]
      e.features[0] = length / 1000.0;
      e.features[1] = speed / 100.0;
      e.features[2] = double(1 + int(rng.below(3))) / 4.0;  // lanes
      e.features[3] = rng.uniform() < 0.2 ? 1.0 : 0.0;      // signalized
      for (int f = 4; f < kEdgeFeatureDim; ++f)
        e.features[std::size_t(f)] = rng.uniform();
      edges.push_back(std::move(e));
    }
  };

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) add_street(r, c, r, c + 1);
      if (r + 1 < rows) add_street(r, c, r + 1, c);
    }
  // seeded diagonal shortcuts make alternative routes common
  const int diagonals = std::max(1, (rows - 1) * (cols - 1) / 4);
  for (int k = 0; k < diagonals; ++k) {
    const int r = int(rng.below(std::uint64_t(rows - 1)));
    const int c = int(rng.below(std::uint64_t(cols - 1)));
    add_street(r, c, r + 1, c + 1);
  }
  return build_network(nodes, edges);
}

TrafficOracle generate_world(std::uint64_t seed, const RoadNetwork& net,
                             const WorldConfig& cfg) {
  if (cfg.d <= 0 || cfg.drift_epoch_s <= 0.0 || cfg.horizon_s <= 0.0)
    throw Error("world config needs positive d, epoch, and horizon");
  if (!(cfg.kappa_opt < 1.0 && 1.0 < cfg.kappa_pess))
    throw Error("interval multipliers must straddle 1");
  if (cfg.rho_true < 0.0) throw Error("rho_true must be nonnegative");
  if (cfg.depot_ids.empty()) throw Error("world needs at least one depot");

  TrafficOracle w;
  w.seed = seed;
  w.cfg = cfg;
  w.net = net;
  Rng root(seed);
  Rng world_rng = root.child(seedtag::world);
  w.hidden = default_representation(cfg.d, world_rng.bits());

  if (cfg.rho_true > 0.0) {
    const std::size_t anchors =
        std::size_t(std::ceil(cfg.horizon_s / cfg.drift_epoch_s)) + 2;
    w.drift.reserve(anchors);
    for (std::size_t k = 0; k < anchors; ++k)
      w.drift.push_back(sample_feasible(cfg.rho_true, cfg.d, world_rng));
  }

  for (const std::string& id : cfg.depot_ids)
    w.depots.push_back(net.index_of(id));
  w.region = nearest_depot_by_hops(net, w.depots);

  // calibrate raw quadratic costs to road-scale seconds at time zero
  const Matrix phi0 = embed_edges(w.hidden, net, context_at(w, 0.0));
  std::vector<double> raw = edge_costs(phi0);
  std::sort(raw.begin(), raw.end());
  const double median = raw[raw.size() / 2];
  w.cost_scale = median > 0.0 ? cfg.median_edge_s / median : 1.0;
  return w;
}

std::vector<double> context_at(const TrafficOracle& w, double sim_time) {
  const double t = std::max(0.0, sim_time);
  std::vector<double> ctx(std::size_t(kContextDim), 0.0);
  const std::uint64_t cs = splitmix64(w.seed ^ 0x636f6e74657874ULL);
  const double periods[5] = {21600.0, 43200.0, 86400.0, 172800.0, 259200.0};
  for (int i = 0; i < 5; ++i) {
    const double phase =
        kTwoPi * double(splitmix64(cs + std::uint64_t(i)) >> 11) * 0x1.0p-53;
    ctx[std::size_t(i)] = 0.5 + 0.5 * std::sin(kTwoPi * t / periods[i] + phase);
  }
  ctx[5] = std::fmod(t / 3600.0, 24.0) / 24.0;
  const std::uint64_t day = std::uint64_t(t / 86400.0);
  ctx[std::size_t(6 + int(day % 7))] = 1.0;
  ctx[std::size_t(13 + int((day / 30) % 12))] = 1.0;
  ctx[25] = (splitmix64(cs ^ (day * 2 + 1)) & 15) == 0 ? 1.0 : 0.0;
  ctx[26] = (splitmix64(cs ^ (day * 2 + 2)) & 15) == 0 ? 1.0 : 0.0;
  return ctx;
}

std::vector<double> costs_at(const TrafficOracle& w, double sim_time) {
  const Matrix phi = embed_edges(w.hidden, w.net, context_at(w, sim_time));
  std::vector<double> c = costs_under_metric(phi, drift_at(w, sim_time));
  for (double& v : c) v *= w.cost_scale;
  return c;
}

OracleReply oracle_query(const TrafficOracle& w, int origin, int dest,
                         double sim_time) {
  const std::vector<double> c = costs_at(w, sim_time);
  auto [z, h] = dijkstra(w.net, c, make_od_indices(w.net, {origin}, dest));
  OracleReply r;
  r.route = z.edge_seq;
  r.duration = h;
  r.first_dt = c[std::size_t(z.edge_seq.front())] *
               segment_noise(w, z.edge_seq.front(), sim_time);
  r.optimistic = w.cfg.kappa_opt * h;
  r.pessimistic = w.cfg.kappa_pess * h;
  return r;
}

SimOutcome adaptive_simulate(const TrafficOracle& w, int origin, int dest,
                             double t0) {
  SimOutcome out;
  int cur = origin;
  const int guard = 10 * w.net.node_count();
  while (cur != dest) {
    if (int(out.segments.size()) >= guard)
      throw CycleGuard("adaptive simulation exceeded the segment guard");
    const OracleReply r = oracle_query(w, cur, dest, t0 + out.t_final);
    ++out.queries;
    const int e = r.route.front();
    out.segments.emplace_back(e, r.first_dt);
    out.t_final += r.first_dt;
    cur = w.net.edges[std::size_t(e)].to;
  }
  return out;
}

SimOutcome hybrid_simulate(const TrafficOracle& w,
                           const std::vector<int>& prefix, int q, int dest,
                           double t0) {
  if (prefix.empty()) throw PrefixBroken("empty prescribed prefix");
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (prefix[i] < 0 || prefix[i] >= w.net.edge_count())
      throw PrefixBroken("prescribed edge is not in the network");
    if (i > 0 && w.net.edges[std::size_t(prefix[i])].from !=
                     w.net.edges[std::size_t(prefix[i - 1])].to)
      throw PrefixBroken("prescribed edges do not chain");
  }
  if (q < 0) throw Error("prefix length must be nonnegative");

  SimOutcome out;
  int cur = w.net.edges[std::size_t(prefix.front())].from;
  const std::size_t k = std::min(std::size_t(q), prefix.size());
  if (k > 0) ++out.queries;  // one query covers the prescribed leg
  for (std::size_t i = 0; i < k && cur != dest; ++i) {
    const int e = prefix[i];
    const double t = t0 + out.t_final;
    const double dt =
        costs_at(w, t)[std::size_t(e)] * segment_noise(w, e, t);
    out.segments.emplace_back(e, dt);
    out.t_final += dt;
    cur = w.net.edges[std::size_t(e)].to;
  }

  const int guard = 10 * w.net.node_count();
  while (cur != dest) {
    if (int(out.segments.size()) >= guard)
      throw CycleGuard("hybrid simulation exceeded the segment guard");
    const OracleReply r = oracle_query(w, cur, dest, t0 + out.t_final);
    ++out.queries;
    const int e = r.route.front();
    out.segments.emplace_back(e, r.first_dt);
    out.t_final += r.first_dt;
    cur = w.net.edges[std::size_t(e)].to;
  }
  return out;
}

std::vector<Sample> generate_dataset(const TrafficOracle& w, int n,
                                     std::uint64_t seed) {
  Rng rng = Rng(seed).child(seedtag::data);
  std::vector<int> targets;
  for (int v = 0; v < w.net.node_count(); ++v)
    if (std::find(w.depots.begin(), w.depots.end(), v) == w.depots.end())
      targets.push_back(v);
  if (targets.empty()) throw Error("network has no non-depot nodes");

  std::vector<Sample> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    Sample s;
    const double tau = rng.uniform(0.0, w.cfg.horizon_s);
    s.origin = w.depots[rng.below(w.depots.size())];
    s.dest = targets[rng.below(targets.size())];
    s.context = context_at(w, tau);
    s.t_s = adaptive_simulate(w, s.origin, s.dest, tau).t_final;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

nlohmann::json cfg_to_json(const WorldConfig& cfg) {
  nlohmann::json j;
  j["d"] = cfg.d;
  j["rho_true"] = cfg.rho_true;
  j["drift_epoch_s"] = cfg.drift_epoch_s;
  j["kappa_opt"] = cfg.kappa_opt;
  j["kappa_pess"] = cfg.kappa_pess;
  j["noise_sigma"] = cfg.noise_sigma;
  j["horizon_s"] = cfg.horizon_s;
  j["median_edge_s"] = cfg.median_edge_s;
  j["depot_ids"] = cfg.depot_ids;
  return j;
}

WorldConfig cfg_from_json(const nlohmann::json& j) {
  WorldConfig cfg;
  cfg.d = j.at("d").get<int>();
  cfg.rho_true = j.at("rho_true").get<double>();
  cfg.drift_epoch_s = j.at("drift_epoch_s").get<double>();
  cfg.kappa_opt = j.at("kappa_opt").get<double>();
  cfg.kappa_pess = j.at("kappa_pess").get<double>();
  cfg.noise_sigma = j.at("noise_sigma").get<double>();
  cfg.horizon_s = j.at("horizon_s").get<double>();
  cfg.median_edge_s = j.at("median_edge_s").get<double>();
  cfg.depot_ids = j.at("depot_ids").get<std::vector<std::string>>();
  return cfg;
}

}  // namespace

std::string world_to_json(const TrafficOracle& w) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = w.seed;
  j["cfg"] = cfg_to_json(w.cfg);
  return j.dump(2) + "\n";
}

TrafficOracle world_from_json(const std::string& text,
                              const RoadNetwork& net) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("version").get<int>() != 1) throw Error("unknown world version");
  return generate_world(j.at("seed").get<std::uint64_t>(), net,
                        cfg_from_json(j.at("cfg")));
}

TrafficOracle load_world(const std::string& path, const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return world_from_json(buf.str(), net);
}

void save_world(const TrafficOracle& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << world_to_json(w);
}

}  // namespace optigap
