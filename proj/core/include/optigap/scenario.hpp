#pragma once

#include <utility>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"

namespace optigap {

// symmetric d x d; positive definite wherever it enters a divergence
using MetricMatrix = Matrix;

// edge embeddings plus a radius; rho = 0 collapses the set to the nominal
// point prediction
struct ScenarioSet {
  Matrix phi;
  double rho = 0.0;
};

// kappa(x) = x - ln x - 1, the per-eigenvalue divergence budget
double kappa(double x);
// inverse of kappa on one side: lower = true solves on (0,1], else [1,inf)
double kappa_inverse(double budget, bool lower);

// Tr(X) - log det(X) - d; zero only at the identity
double burg_divergence(const Matrix& x);

// [m_rho, M_rho]: every eigenvalue of every matrix with divergence <= rho
// lies in this interval; both ends solve kappa(lambda) = rho
std::pair<double, double> eig_interval(double rho);

// c[e] = phi[e]^T X phi[e]; tiny negative roundoff is clamped to zero
std::vector<double> costs_under_metric(const Matrix& phi, const Matrix& x);

// Random matrix with divergence exactly frac*rho (frac drawn in [0.05, 0.95]
// when not given). Construction: X = I + tU with U a random unit-Frobenius
// symmetric direction and t found by bisection in U's eigenbasis.
Matrix sample_feasible(double rho, int d, Rng& rng);
Matrix sample_feasible(double rho, int d, Rng& rng, double frac);

// LP-dual certificate recovered from shortest-path potentials at the final
// metric: pi[v] = capped distance-to-dest, omega = 0.
struct RadiusCertificate {
  std::vector<double> pi;
  std::vector<double> omega;
  Matrix x;
  double h = 0.0;  // min path cost under x
};

struct TargetRadiusResult {
  double rho = 0.0;
  double h_hat = 0.0;  // nominal shortest value
  RadiusCertificate cert;
  int cuts = 0;
};

// Smallest divergence such that every origin->dest path costs at least t.
// Returns 0 whenever the nominal shortest value already reaches t. Cutting
// planes with the closed-form dual metric X(mu) = (I - sum mu_j G_j)^{-1};
// separation by Dijkstra; throws UnboundedRadius when a path with an
// identically zero embedding makes the program infeasible.
TargetRadiusResult target_radius(const Matrix& phi, const RoadNetwork& net,
                                 const OdSpec& od, double t);

}  // namespace optigap
