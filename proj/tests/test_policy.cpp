#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "optigap/dca.hpp"
#include "optigap/nets.hpp"
#include "optigap/policy.hpp"
#include "test_util.hpp"

using namespace optigap;
using namespace testutil;

namespace {

// two depots O and P with distinct route choices toward the shared dest D,
// plus Q for three-depot runs
RoadNetwork depot_net() {
  return build_network(
      nodes({"O", "P", "Q", "M", "D"}),
      {edge(1, "O", "D", 400.0), edge(2, "O", "M", 150.0),
       edge(3, "M", "D", 150.0), edge(4, "P", "M", 120.0),
       edge(5, "P", "D", 300.0), edge(6, "Q", "M", 200.0),
       edge(7, "Q", "D", 500.0)});
}

ModelBundle bundle() {
  ModelBundle b;
  b.rep = default_representation(8, 3);
  b.radius = default_radius(8, 4);
  b.init_seed = 3;
  return b;
}

std::vector<double> ctx_const(double v) {
  return std::vector<double>(std::size_t(kContextDim), v);
}

// nominal-worst simple path from any depot, used as a clearly beatable primary
PathVec worst_path(const ModelBundle& b, const RoadNetwork& net,
                   const std::vector<double>& ctx, const OdSpec& od) {
  const std::vector<double> c = edge_costs(embed_edges(b.rep, net, ctx));
  PathVec worst;
  double worst_cost = -1.0;
  for (const PathVec& z : enumerate_simple_paths(net, od)) {
    const double v = seq_cost(c, z);
    if (v > worst_cost) {
      worst_cost = v;
      worst = z;
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("threshold arithmetic follows the cost-over-slope rule") {
  ThresholdSpec spec;
  spec.c = 10.0;
  spec.kind = RiskCurve::constant;
  spec.lambda0 = 0.05;
  CHECK(threshold(spec, 120.0) == 200.0);

  spec.c = 0.0;
  CHECK(threshold(spec, 120.0) == 0.0);

  spec.c = 10.0;
  spec.kind = RiskCurve::exponential_decay;
  spec.lambda0 = 0.05;
  spec.tau_decay = 300.0;
  // the slope decays with nominal time, so the threshold grows
  CHECK(threshold(spec, 100.0) < threshold(spec, 600.0));

  spec.kind = RiskCurve::constant;
  spec.lambda0 = 0.0;
  CHECK_THROWS_AS(threshold(spec, 100.0), NonpositiveSlope);
  spec.lambda0 = 0.05;
  spec.c = -1.0;
  CHECK_THROWS_AS(threshold(spec, 100.0), Error);
}

TEST_CASE("a zero radius with the nominal primary stays single even at zero threshold") {
  const RoadNetwork net = depot_net();
  const ModelBundle b = bundle();
  const std::vector<double> ctx = ctx_const(0.3);
  ThresholdSpec spec;
  spec.c = 0.0;
  spec.lambda0 = 0.05;
  const double rho = 0.0;
  const DispatchDecision d =
      decide(b, net, ctx, {net.index_of("O"), net.index_of("P")},
             net.index_of("D"), spec, {}, nullptr, &rho);
  CHECK(d.gap_s == 0.0);
  CHECK(d.thr_s == 0.0);
  CHECK(!d.dispatch_second);  // ties stay single
  CHECK(d.t_nominal_s > 0.0);
  CHECK(d.rho == 0.0);
}

TEST_CASE("a dominated primary with a zero threshold dispatches dual") {
  const RoadNetwork net = depot_net();
  const ModelBundle b = bundle();
  const std::vector<double> ctx = ctx_const(0.3);
  const OdSpec od =
      make_od_indices(net, {net.index_of("O"), net.index_of("P")}, net.index_of("D"));
  const PathVec z1 = worst_path(b, net, ctx, od);

  ThresholdSpec spec;
  spec.c = 0.0;
  spec.lambda0 = 0.05;
  const double rho = 0.0;
  const DispatchDecision d = decide(b, net, ctx, od.origins, od.dest, spec, {},
                                    &z1, &rho);
  CHECK(d.gap_s > 0.0);
  CHECK(d.dispatch_second);
  CHECK(!d.z2.edge_seq.empty());
  CHECK(d.z2.edge_seq != d.z1.edge_seq);
}

TEST_CASE("the dispatch bit is exactly the strict threshold comparison") {
  const RoadNetwork net = depot_net();
  const ModelBundle b = bundle();
  const std::vector<double> ctx = ctx_const(0.55);
  const OdSpec od =
      make_od_indices(net, {net.index_of("O"), net.index_of("P")}, net.index_of("D"));
  const PathVec z1 = worst_path(b, net, ctx, od);
  const double rho = 0.3;

  bool was_dual = true;
  for (double c : {0.0, 1e-4, 0.5, 50.0, 5e4}) {
    ThresholdSpec spec;
    spec.c = c;
    spec.lambda0 = 0.05;
    const DispatchDecision d = decide(b, net, ctx, od.origins, od.dest, spec,
                                      {}, &z1, &rho);
    CHECK(d.dispatch_second == (d.gap_s > d.thr_s));
    // raising the threshold can only turn dual off, never back on
    if (!was_dual) CHECK(!d.dispatch_second);
    was_dual = d.dispatch_second;
  }
}

TEST_CASE("three depots reduce to the best pairwise gap against the primary") {
  const RoadNetwork net = depot_net();
  const ModelBundle b = bundle();
  const std::vector<double> ctx = ctx_const(0.4);
  const int o = net.index_of("O"), p = net.index_of("P"), q = net.index_of("Q");
  const int dest = net.index_of("D");

  // pin the primary to an O route so every run compares the same z1
  const OdSpec od_o = make_od_indices(net, {o}, dest);
  const PathVec z1 = worst_path(b, net, ctx, od_o);
  const double rho = 0.35;
  ThresholdSpec spec;
  spec.c = 10.0;
  spec.lambda0 = 0.05;

  const DispatchDecision all =
      decide(b, net, ctx, {o, p, q}, dest, spec, {}, &z1, &rho);
  const DispatchDecision vs_p =
      decide(b, net, ctx, {o, p}, dest, spec, {}, &z1, &rho);
  const DispatchDecision vs_q =
      decide(b, net, ctx, {o, q}, dest, spec, {}, &z1, &rho);
  CHECK(all.gap_s == std::max(vs_p.gap_s, vs_q.gap_s));
}

TEST_CASE("brute force refuses oversized instances and never reports negative surplus") {
  Rng rng(121);
  const RoadNetwork net = diamond();
  const OdSpec od = make_od(net, {"a"}, "d");
  const Matrix phi = rand_phi(4, 2, rng);
  const PathVec z0 = dijkstra(net, edge_costs(phi), od).first;
  PathVec z1;
  for (const PathVec& z : enumerate_simple_paths(net, od)) {
    if (z.edge_seq != z0.edge_seq) z1 = z;
  }

  const PthrResult closed = brute_force_pthr(phi, 0.3, z1, 1e9, net, od);
  CHECK(!closed.tau);
  CHECK(closed.surplus == 0.0);

  const PthrResult open = brute_force_pthr(phi, 0.3, z1, 0.0, net, od);
  CHECK(open.tau);
  CHECK(open.surplus > 0.0);

  for (double thr : {0.0, 0.05, 0.2, 1.0, 7.0}) {
    CHECK(brute_force_pthr(phi, 0.3, z1, thr, net, od).surplus >= 0.0);
  }

  const Matrix wide = rand_phi(4, 4, rng);
  CHECK_THROWS_AS(brute_force_pthr(wide, 0.3, z1, 0.0, net, od), TooLarge);
  Rng rng2(122);
  const RoadNetwork big = random_dag(12, 6, rng2);  // 17 edges
  REQUIRE(big.edge_count() == 17);
  const OdSpec bod = make_od(big, {"v0"}, "v11");
  const Matrix bphi = rand_phi(17, 2, rng2);
  const PathVec bz = dijkstra(big, edge_costs(bphi), bod).first;
  CHECK_THROWS_AS(brute_force_pthr(bphi, 0.3, bz, 0.0, big, bod), TooLarge);
}

TEST_CASE("the gap rule attains the enumerated surplus on a small instance") {
  Rng rng(123);
  const RoadNetwork net = diamond();
  const OdSpec od = make_od(net, {"a"}, "d");
  const Matrix phi = rand_phi(4, 2, rng);
  const PathVec z0 = dijkstra(net, edge_costs(phi), od).first;
  PathVec z1;
  for (const PathVec& z : enumerate_simple_paths(net, od)) {
    if (z.edge_seq != z0.edge_seq) z1 = z;
  }

  const double rho = 0.3;
  const double thr = 0.02;
  GapConfig cfg;
  cfg.restart_seed = 9;
  const GapResult gap = optimistic_gap(phi, net, od, z1, rho, cfg);
  const double rule_surplus = std::max(0.0, gap.gap_estimate - thr);
  const PthrResult oracle = brute_force_pthr(phi, rho, z1, thr, net, od);
  CHECK(std::fabs(rule_surplus - oracle.surplus) <= 1e-3);
  CHECK((gap.gap_estimate > thr) == oracle.tau);
}

TEST_CASE("decision records serialize every field the dispatcher needs") {
  const RoadNetwork net = depot_net();
  const ModelBundle b = bundle();
  ThresholdSpec spec;
  spec.c = 10.0;
  spec.lambda0 = 0.05;
  const double rho = 0.2;
  const DispatchDecision d =
      decide(b, net, ctx_const(0.3), {net.index_of("O"), net.index_of("P")},
             net.index_of("D"), spec, {}, nullptr, &rho);
  const std::string j = decision_to_json(d, net);
  for (const char* key : {"\"tau\"", "\"z1_edges\"", "\"z2_edges\"", "\"gap_s\"",
                          "\"thr_s\"", "\"rho\"", "\"t_nominal_s\""}) {
    CHECK(j.find(key) != std::string::npos);
  }
}
