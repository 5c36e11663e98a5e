#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"

namespace optigap {

// G(z) = sum_e z[e] * phi[e] phi[e]^T; positive semidefinite
using PathMatrix = Matrix;

Matrix path_matrix(const Matrix& phi, const PathVec& z);

// cost of a path accumulated in tail-to-head order (the same order dijkstra
// uses for its value, so equal paths give bitwise-equal costs)
double path_cost(const std::vector<double>& costs, const PathVec& z);

// (zeta, z*): z* is the shortest path under the metric costs with the
// deterministic tie-break; zeta = -G(z*) is a subgradient of
// f2(X) = -min_z <G(z), X>.
std::pair<Matrix, PathVec> subgradient_f2(const Matrix& phi,
                                          const RoadNetwork& net,
                                          const OdSpec& od, const Matrix& x);

// (gamma0, gamma_max): the scalar root lies in (gamma0, gamma_max]
std::pair<double, double> gamma_bounds(const std::vector<double>& eigs,
                                       double rho);

// residual of the scalar secular equation at gamma
double gamma_residual(const std::vector<double>& eigs, double rho, double gamma);

// unique root of the secular equation; |residual| <= 1e-8 guaranteed.
// Safeguarded Newton inside [gamma0, gamma_max] with bisection fallback.
double root_search(const std::vector<double>& eigs, double rho, double eps_gamma);
double root_search(const std::vector<double>& eigs, double rho);

// argmin_{D_Burg(X,I) <= rho} <G, X> = gamma* (G + gamma* I)^{-1}; the
// constraint is active at the solution
Matrix solve_subproblem(const Matrix& g, double rho);

// cyclic Jacobi for symmetric matrices up to d = 64; returns (Q, lambda)
// with S = Q diag(lambda) Q^T, eigenvalues ascending
std::pair<Matrix, std::vector<double>> jacobi_eigh(const Matrix& s);

enum class GapTermination { tolerance, max_iter, zero_radius };

struct GapConfig {
  double eps = 1e-6;
  int max_iter = 50;
  std::uint64_t restart_seed = 0;
};

struct GapResult {
  double gap_estimate = 0.0;  // seconds; a lower bound of the exact gap
  PathVec secondary_path;     // shortest path at the final metric
  Matrix x_final;
  std::vector<double> trace;      // W_k per completed subproblem iteration
  std::vector<double> objective;  // f(X^(k)) at every shortest-path evaluation
  int iterations = 0;
  GapTermination terminated_by = GapTermination::tolerance;
};

// Difference-of-convex iteration for the optimistic time gap of z1 over the
// divergence ball of radius rho. Restarts from a random feasible matrix when
// the linearization vanishes (shortest path equals z1); two consecutive
// fruitless restarts terminate with the current gap.
GapResult optimistic_gap(const Matrix& phi, const RoadNetwork& net,
                         const OdSpec& od, const PathVec& z1, double rho,
                         const GapConfig& cfg = {});

}  // namespace optigap
