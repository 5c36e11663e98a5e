#include "optigap/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "optigap/dca.hpp"
#include "optigap/nets.hpp"

namespace optigap {

double kappa(double x) { return (x - 1.0) - std::log1p(x - 1.0); }

double kappa_inverse(double budget, bool lower) {
  if (budget <= 0.0) return 1.0;
  double lo, hi;
  if (lower) {
    // kappa decreases from +inf to 0 on (0,1]
    lo = 1.0;
    while (kappa(lo) < budget) lo *= 0.5;
    hi = 1.0;
  } else {
    // kappa increases from 0 on [1,inf)
    lo = 1.0;
    hi = 2.0;
    while (kappa(hi) < budget) hi *= 2.0;
  }
  // bracketed Newton: kappa is convex with monotone sign on each branch, so
  // the step is safeguarded by the bracket and falls back to bisection
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = kappa(x) - budget;
    if ((f < 0.0) == lower) hi = x; else lo = x;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    const double xn = x - f / (1.0 - 1.0 / x);
    x = (xn > lo && xn < hi) ? xn : 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

double burg_divergence(const Matrix& x) {
  Matrix s = x;
  symmetrize(s);
  Matrix l;
  if (!cholesky(s, l))
    throw NotPositiveDefinite("burg divergence needs a positive-definite matrix");
  double tr = 0.0;
  for (int i = 0; i < s.rows; ++i) tr += s(i, i);
  return tr - logdet_from_cholesky(l) - double(s.rows);
}

std::pair<double, double> eig_interval(double rho) {
  if (rho < 0.0) throw Error("eig_interval needs rho >= 0");
  if (rho == 0.0) return {1.0, 1.0};
  return {kappa_inverse(rho, true), kappa_inverse(rho, false)};
}

std::vector<double> costs_under_metric(const Matrix& phi, const Matrix& x) {
  if (x.rows != phi.cols || x.cols != phi.cols)
    throw DimMismatch("metric dimension does not match embedding dimension");
  std::vector<double> c(phi.rows);
  for (int e = 0; e < phi.rows; ++e) {
    const double q = quad_form(x, &phi.v[std::size_t(e) * phi.cols]);
    c[e] = q < 0.0 ? 0.0 : q;
  }
  return c;
}

Matrix sample_feasible(double rho, int d, Rng& rng, double frac) {
  if (rho <= 0.0) throw ZeroRadius("sample_feasible needs rho > 0");
  const double target = rho * frac;

  // random symmetric unit-Frobenius direction
  Matrix u(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double g = rng.normal();
      u(i, j) = g;
      u(j, i) = g;
    }
  const double fn = frob_norm(u);
  if (fn == 0.0) { u(0, 0) = 1.0; }
  else { u = (1.0 / fn) * u; }

  auto [q, mu] = jacobi_eigh(u);
  const double mu_min = *std::min_element(mu.begin(), mu.end());

  // divergence of I + tU along the ray: sum kappa(1 + t*mu_i), strictly
  // increasing in t on the positive-definite range
  auto div_at = [&](double t) {
    double s = 0.0;
    for (double m : mu) s += kappa(1.0 + t * m);
    return s;
  };

  double lo = 0.0, hi;
  if (mu_min < 0.0) {
    hi = (1.0 - 1e-12) / (-mu_min);
    if (div_at(hi) < target) hi = (1.0 - 1e-15) / (-mu_min);
  } else {
    hi = 1.0;
    while (div_at(hi) < target) hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (div_at(mid) < target ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  const double t = 0.5 * (lo + hi);

  Matrix x(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += q(i, k) * (1.0 + t * mu[k]) * q(j, k);
      x(i, j) = s;
    }
  symmetrize(x);
  return x;
}

Matrix sample_feasible(double rho, int d, Rng& rng) {
  const double frac = rng.uniform(0.05, 0.95);
  return sample_feasible(rho, d, rng, frac);
}

namespace {

// maximize g(mu) = t*sum(mu) + logdet(I - sum mu_j G_j) over mu >= 0.
// X(mu) = (I - sum mu_j G_j)^{-1} is the primal metric of the current cut
// relaxation. Projected gradient ascent with backtracking on
// positive-definiteness violations and objective decrease.
struct DualAscent {
  const std::vector<Matrix>& cuts;
  double t;
  int d;

  bool assemble(const std::vector<double>& mu, Matrix& m) const {
    m = Matrix::identity(d);
    for (std::size_t j = 0; j < cuts.size(); ++j)
      for (std::size_t k = 0; k < m.v.size(); ++k)
        m.v[k] -= mu[j] * cuts[j].v[k];
    return true;
  }

  bool objective(const std::vector<double>& mu, double& val, Matrix& x) const {
    Matrix m;
    assemble(mu, m);
    Matrix l;
    if (!cholesky(m, l)) return false;
    double s = 0.0;
    for (double v : mu) s += v;
    val = t * s + logdet_from_cholesky(l);
    x = inverse_spd(m);
    return true;
  }

  // stops at projected-gradient inf-norm <= 1e-8 or 500 accepted steps
  void run(std::vector<double>& mu, Matrix& x) const {
    double val;
    if (!objective(mu, val, x))
      throw NotPositiveDefinite("dual ascent started outside the domain");
    double step = 0.1;
    for (int it = 0; it < 500; ++it) {
      std::vector<double> grad(mu.size());
      double pg = 0.0;
      for (std::size_t j = 0; j < mu.size(); ++j) {
        grad[j] = t - frob_inner(cuts[j], x);
        const double p = (mu[j] <= 0.0 && grad[j] < 0.0) ? 0.0 : grad[j];
        pg = std::max(pg, std::fabs(p));
      }
      if (pg <= 1e-8) return;

      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<double> cand(mu.size());
        for (std::size_t j = 0; j < mu.size(); ++j)
          cand[j] = std::max(0.0, mu[j] + step * grad[j]);
        double cval;
        Matrix cx;
        if (objective(cand, cval, cx) && cval >= val - 1e-14) {
          mu = std::move(cand);
          val = cval;
          x = std::move(cx);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) return;  // step underflow: no further progress possible
      step = std::min(step * 1.5, 1e6);
    }
  }
};

}  // namespace

TargetRadiusResult target_radius(const Matrix& phi, const RoadNetwork& net,
                                 const OdSpec& od, double t) {
  const int d = phi.cols;
  TargetRadiusResult res;

  const std::vector<double> c_hat = edge_costs(phi);
  auto [z0, h_hat] = dijkstra(net, c_hat, od);
  res.h_hat = h_hat;

  auto certificate = [&](const Matrix& x) {
    RadiusCertificate cert;
    const std::vector<double> c = costs_under_metric(phi, x);
    const std::vector<double> dist = dist_to_dest(net, c, od.dest);
    constexpr double kBig = 1e12;
    cert.pi.resize(net.node_count());
    for (int v = 0; v < net.node_count(); ++v)
      cert.pi[v] = std::min(dist[v], kBig);
    cert.omega.assign(net.edge_count(), 0.0);
    cert.x = x;
    double h = kBig;
    for (int o : od.origins) h = std::min(h, dist[o]);
    cert.h = h;
    return cert;
  };

  if (h_hat >= t) {
    res.rho = 0.0;
    res.cert = certificate(Matrix::identity(d));
    return res;
  }
  if (h_hat == 0.0)
    throw UnboundedRadius(
        "a zero-cost path at the identity stays zero under every metric");

  std::vector<Matrix> cuts;
  std::vector<std::vector<int>> cut_seqs;
  cuts.push_back(path_matrix(phi, z0));
  cut_seqs.push_back(z0.edge_seq);
  if (max_abs(cuts.back()) == 0.0)
    throw UnboundedRadius("shortest path has an identically zero embedding");

  std::vector<double> mu(1, 0.0);
  Matrix x = Matrix::identity(d);
  int stuck = 0;

  // exits can sit a hair inside the target; path costs scale linearly with
  // the metric, so x *= t/h restores feasibility at negligible divergence
  const auto finish = [&](Matrix xf) {
    const double h = dijkstra(net, costs_under_metric(phi, xf), od).second;
    if (h < t && h > 0.0) {
      const double scale = t / h;
      for (double& v : xf.v) v *= scale;
    }
    res.rho = burg_divergence(xf);
    res.cert = certificate(xf);
    res.cuts = int(cuts.size());
    return res;
  };

  for (int outer = 0; outer < 200; ++outer) {
    DualAscent ascent{cuts, t, d};
    ascent.run(mu, x);

    const std::vector<double> c = costs_under_metric(phi, x);
    auto [z_new, h] = dijkstra(net, c, od);
    if (h >= t - 1e-8) return finish(x);

    Matrix g = path_matrix(phi, z_new);
    if (max_abs(g) == 0.0)
      throw UnboundedRadius("separation found a path with zero embedding");

    const bool duplicate =
        std::find(cut_seqs.begin(), cut_seqs.end(), z_new.edge_seq) !=
        cut_seqs.end();
    if (duplicate) {
      // dual not yet tight enough to move past this cut; one more ascent
      // round usually resolves it, two in a row means we are at numerical
      // precision and the current metric is the answer
      if (++stuck >= 2) return finish(x);
      continue;
    }
    stuck = 0;
    cuts.push_back(std::move(g));
    cut_seqs.push_back(z_new.edge_seq);
    mu.push_back(0.0);
  }

  return finish(x);
}

}  // namespace optigap
