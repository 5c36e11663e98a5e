#pragma once

#include <utility>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"
#include "optigap/nets.hpp"

namespace optigap {

// Slow, independent reference implementations used as oracles by the test
// suite and by brute_force_pthr. None of them share numerical machinery with
// the fast paths they check.

// max <A, X> over the divergence ball of radius rho, d <= 3. Dense rotation
// grid with local refinement; the eigenvalue subproblem per rotation is
// solved by nested ternary search (it is concave along each axis).
double grid_max_linear(const Matrix& a, double rho);

// exact optimistic gap: max over enumerated simple paths z of
// grid_max_linear(G(z1) - G(z)); |E| <= 32 via enumerate_simple_paths
double delta_grid(const Matrix& phi, const RoadNetwork& net, const OdSpec& od,
                  const PathVec& z1, double rho);

// max over the ball of the minimum path cost (d = 2 only); used by the
// target-radius oracle. Grid over rotation angle and both eigenvalues,
// refined locally; covers the interior, where max-min optima can sit.
double grid_max_min_cost(const Matrix& phi, const RoadNetwork& net,
                         const OdSpec& od, double rho);

// bisection on rho: smallest radius whose max-min path cost reaches t
double target_radius_bisect(const Matrix& phi, const RoadNetwork& net,
                            const OdSpec& od, double t);

// textbook Bellman-Ford with forward cost accumulation; no tie-break
// guarantee, agreement with dijkstra is only asserted on tie-free inputs
std::pair<PathVec, double> bellman_ford(const RoadNetwork& net,
                                        const std::vector<double>& costs,
                                        const OdSpec& od);

// plain bisection for the secular root, independent of the Newton path
double gamma_bisect(const std::vector<double>& eigs, double rho);

// one-sided signed-rank p by direct enumeration of all sign assignments
std::pair<double, double> wilcoxon_enumerate(const std::vector<double>& diffs);

// central finite differences of the frozen-path objective over the flattened
// parameter vector
std::vector<double> fd_gradient_path(const RepresentationModel& m,
                                     const RoadNetwork& net,
                                     const std::vector<double>& context,
                                     const PathVec& z, double t_obs,
                                     LossKind loss, double huber_delta,
                                     double beta, double h);

// central finite differences of the graph regularizer over the flattened
// parameter vector (context/cross blocks come out zero)
std::vector<double> fd_gradient_regularizer(const RepresentationModel& m,
                                            const RoadNetwork& net, double h);

}  // namespace optigap
