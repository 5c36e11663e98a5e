#pragma once

#include <optional>
#include <string>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/dca.hpp"
#include "optigap/netgraph.hpp"
#include "optigap/nets.hpp"

namespace optigap {

enum class RiskCurve { constant, exponential_decay };

// time threshold thr = C / lambda(t_nominal); lambda(t) is constant or
// lambda0 * exp(-t / tau_decay)
struct ThresholdSpec {
  double c = 0.0;  // operational cost of a second dispatch, risk units
  RiskCurve kind = RiskCurve::constant;
  double lambda0 = 1.0;    // risk units per second
  double tau_decay = 1.0;  // seconds; exponential-decay kind only
};

double threshold(const ThresholdSpec& spec, double t_nominal);

struct DispatchDecision {
  bool dispatch_second = false;  // tau
  PathVec z1;
  PathVec z2;  // meaningful iff dispatch_second
  double gap_s = 0.0;
  double thr_s = 0.0;
  double rho = 0.0;
  double t_nominal_s = 0.0;
};

// Full decision rule: embed edges for the context, take z1 as the nominal
// shortest path over all depots (or the supplied override), predict the
// radius (or take the override), estimate the optimistic gap, and dispatch a
// second ambulance iff gap > threshold (strict; ties stay single). With more
// than two depots the gap is the best over pairwise runs against the primary
// depot, and z2 is the secondary path with the largest surplus.
DispatchDecision decide(const ModelBundle& models, const RoadNetwork& net,
                        const std::vector<double>& context,
                        const std::vector<int>& depots, int dest,
                        const ThresholdSpec& spec, const GapConfig& dca = {},
                        const PathVec* z1_override = nullptr,
                        const double* rho_override = nullptr);

struct PthrResult {
  bool tau = false;
  PathVec z;  // maximizer of the gap over enumerated paths
  double surplus = 0.0;
};

// Exact maximizer of tau * (gap(z) - thr) by full path enumeration with a
// dense boundary grid for each path's gap; |E| <= 16 and d <= 3 enforced.
PthrResult brute_force_pthr(const Matrix& phi, double rho, const PathVec& z1,
                            double thr, const RoadNetwork& net,
                            const OdSpec& od);

std::string decision_to_json(const DispatchDecision& d, const RoadNetwork& net);

}  // namespace optigap
