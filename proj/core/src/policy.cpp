#include "optigap/policy.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "optigap/reference.hpp"
#include "optigap/scenario.hpp"

namespace optigap {

double threshold(const ThresholdSpec& spec, double t_nominal) {
  if (spec.c < 0.0) throw Error("operational cost must be nonnegative");
  double lambda = 0.0;
  switch (spec.kind) {
    case RiskCurve::constant:
      lambda = spec.lambda0;
      break;
    case RiskCurve::exponential_decay:
      if (spec.tau_decay <= 0.0) throw Error("decay scale must be positive");
      lambda = spec.lambda0 * std::exp(-t_nominal / spec.tau_decay);
      break;
  }
  if (!(lambda > 0.0)) throw NonpositiveSlope("risk slope must be positive");
  return spec.c / lambda;
}

DispatchDecision decide(const ModelBundle& models, const RoadNetwork& net,
                        const std::vector<double>& context,
                        const std::vector<int>& depots, int dest,
                        const ThresholdSpec& spec, const GapConfig& dca,
                        const PathVec* z1_override,
                        const double* rho_override) {
  if (depots.empty()) throw Error("at least one depot is required");
  const Matrix phi = embed_edges(models.rep, net, context);
  const std::vector<double> c_hat = edge_costs(phi);
  const OdSpec od_all = make_od_indices(net, depots, dest);

  DispatchDecision out;
  if (z1_override) {
    out.z1 = *z1_override;
    out.t_nominal_s = path_cost(c_hat, out.z1);
  } else {
    auto [z1, h] = dijkstra(net, c_hat, od_all);
    out.z1 = std::move(z1);
    out.t_nominal_s = h;
  }
  out.thr_s = threshold(spec, out.t_nominal_s);

  if (rho_override) {
    out.rho = *rho_override;
  } else {
    if (!models.radius) throw Error("model bundle has no radius network");
    out.rho = radius_predict(*models.radius,
                             context_embedding(models.rep, context));
  }

  // pairwise reduction: primary depot against each other depot; with two
  // depots this is exactly the direct formulation
  const int primary = out.z1.origin >= 0 ? out.z1.origin : depots.front();
  std::vector<OdSpec> runs;
  if (depots.size() <= 2) {
    runs.push_back(od_all);
  } else {
    for (int q : depots) {
      if (q == primary) continue;
      runs.push_back(make_od_indices(net, {primary, q}, dest));
    }
  }

  bool have = false;
  GapResult best;
  for (const OdSpec& od : runs) {
    GapResult r = optimistic_gap(phi, net, od, out.z1, out.rho, dca);
    if (!have || r.gap_estimate > best.gap_estimate) {
      best = std::move(r);
      have = true;
    }
  }
  out.gap_s = best.gap_estimate;
  out.dispatch_second = out.gap_s > out.thr_s;  // strict: ties stay single
  out.z2 = std::move(best.secondary_path);
  return out;
}

PthrResult brute_force_pthr(const Matrix& phi, double rho, const PathVec& z1,
                            double thr, const RoadNetwork& net,
                            const OdSpec& od) {
  if (net.edge_count() > 16) throw TooLarge("brute force is limited to 16 edges");
  if (phi.cols > 3) throw TooLarge("brute force is limited to d <= 3");

  const Matrix g1 = path_matrix(phi, z1);
  PthrResult out;
  double best_gap = 0.0;
  bool have = false;
  for (const PathVec& z : enumerate_simple_paths(net, od)) {
    const Matrix diff = g1 + (-1.0 * path_matrix(phi, z));
    const double gap =
        max_abs(diff) == 0.0 ? 0.0 : grid_max_linear(diff, rho);
    if (!have || gap > best_gap) {
      best_gap = gap;
      out.z = z;
      have = true;
    }
  }
  if (!have) throw Unreachable("no path from any origin");
  out.surplus = std::max(0.0, best_gap - thr);
  out.tau = out.surplus > 0.0;
  return out;
}

std::string decision_to_json(const DispatchDecision& d,
                             const RoadNetwork& net) {
  nlohmann::json j;
  j["tau"] = d.dispatch_second;
  auto ids = [&](const PathVec& p) {
    std::vector<int> v;
    for (int e : p.edge_seq) v.push_back(net.edges[std::size_t(e)].id);
    return v;
  };
  j["z1_edges"] = ids(d.z1);
  j["z2_edges"] = d.dispatch_second ? ids(d.z2) : std::vector<int>{};
  j["gap_s"] = d.gap_s;
  j["thr_s"] = d.thr_s;
  j["rho"] = d.rho;
  j["t_nominal_s"] = d.t_nominal_s;
  return j.dump(2) + "\n";
}

}  // namespace optigap
