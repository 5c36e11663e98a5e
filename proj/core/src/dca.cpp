#include "optigap/dca.hpp"

#include <algorithm>
#include <cmath>

#include "optigap/scenario.hpp"

namespace optigap {

Matrix path_matrix(const Matrix& phi, const PathVec& z) {
  const int d = phi.cols;
  Matrix g(d, d);
  for (int e : z.edge_seq) {
    const double* row = &phi.v[std::size_t(e) * d];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g(i, j) += row[i] * row[j];
  }
  return g;
}

double path_cost(const std::vector<double>& costs, const PathVec& z) {
  double s = 0.0;
  for (int e : z.edge_seq) s += costs[std::size_t(e)];
  return s;
}

std::pair<Matrix, PathVec> subgradient_f2(const Matrix& phi,
                                          const RoadNetwork& net,
                                          const OdSpec& od, const Matrix& x) {
  const std::vector<double> c = costs_under_metric(phi, x);
  auto [z, h] = dijkstra(net, c, od);
  (void)h;
  Matrix zeta = -1.0 * path_matrix(phi, z);
  return {std::move(zeta), std::move(z)};
}

std::pair<double, double> gamma_bounds(const std::vector<double>& eigs,
                                       double rho) {
  if (rho <= 0.0) throw ZeroRadius("gamma_bounds needs rho > 0");
  double lmin = eigs[0];
  double sumsq = 0.0;
  for (double l : eigs) {
    lmin = std::min(lmin, l);
    sumsq += l * l;
  }
  if (sumsq == 0.0) throw ZeroMatrix("all eigenvalues are zero");
  const double gamma0 = std::max(0.0, -lmin);
  const double gamma_max =
      0.5 * (-lmin + std::sqrt(lmin * lmin + 4.0 * sumsq / rho));
  return {gamma0, gamma_max};
}

double gamma_residual(const std::vector<double>& eigs, double rho,
                      double gamma) {
  double s = 0.0;
  for (double l : eigs) {
    // kappa(gamma/(l+gamma)) with the log expanded through log1p(-l/(l+gamma))
    const double r = l / (l + gamma);
    s += -r - std::log1p(-r);
  }
  return s - rho;
}

namespace {

double residual_slope(const std::vector<double>& eigs, double gamma) {
  // d/dgamma sum kappa(gamma/(l+gamma)) = -sum l^2 / (gamma (l+gamma)^2)
  double s = 0.0;
  for (double l : eigs) {
    const double lg = l + gamma;
    s -= (l * l) / (gamma * lg * lg);
  }
  return s;
}

}  // namespace

double root_search(const std::vector<double>& eigs, double rho,
                   double eps_gamma) {
  auto [gamma0, gamma_max] = gamma_bounds(eigs, rho);

  // residual is strictly decreasing: +inf at gamma0+, <= 0 at gamma_max
  double lo = gamma0;
  double hi = gamma_max;
  while (gamma_residual(eigs, rho, hi) > 0.0) hi *= 2.0;  // roundoff guard

  // lo must be strictly inside the domain before Newton can start
  double step = std::max(1e-300, 1e-12 * std::max(1.0, hi));
  while (gamma_residual(eigs, rho, lo + step) < 0.0) step *= 0.5;
  lo += 0.0;  // keep gamma0 as the hard left wall
  double g = std::min(hi, std::max(lo + step, 0.5 * (lo + hi)));

  for (int it = 0; it < 200; ++it) {
    const double f = gamma_residual(eigs, rho, g);
    if (f > 0.0) lo = g; else hi = g;
    const double width = hi - lo;
    if (std::fabs(f) <= 1e-8 &&
        width <= std::max(eps_gamma, 1e-11 * std::max(1.0, std::fabs(g))))
      return g;
    const double df = residual_slope(eigs, g);
    double next = g - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    g = next;
  }
  throw NoConvergence("secular root search exceeded its iteration cap");
}

double root_search(const std::vector<double>& eigs, double rho) {
  return root_search(eigs, rho, 1e-12);
}

std::pair<Matrix, std::vector<double>> jacobi_eigh(const Matrix& s_in) {
  const int d = s_in.rows;
  if (d > 64) throw TooLarge("eigensolver is limited to dimension 64");
  if (asymmetry(s_in) > 1e-10) throw NotSymmetric("matrix is not symmetric");

  Matrix a = s_in;
  symmetrize(a);
  Matrix q = Matrix::identity(d);
  const double scale = std::max(1.0, frob_norm(a));

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int r = p + 1; r < d; ++r) off += 2.0 * a(p, r) * a(p, r);
    if (std::sqrt(off) <= 1e-12 * scale) break;

    for (int p = 0; p < d - 1; ++p) {
      for (int r = p + 1; r < d; ++r) {
        const double apq = a(p, r);
        if (apq == 0.0) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, r);
          a(k, p) = c * akp - sn * akq;
          a(k, r) = sn * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(r, k);
          a(p, k) = c * apk - sn * aqk;
          a(r, k) = sn * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double qkp = q(k, p), qkq = q(k, r);
          q(k, p) = c * qkp - sn * qkq;
          q(k, r) = sn * qkp + c * qkq;
        }
      }
    }
  }

  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) < a(j, j); });
  Matrix qs(d, d);
  std::vector<double> lam(d);
  for (int j = 0; j < d; ++j) {
    lam[j] = a(order[j], order[j]);
    for (int i = 0; i < d; ++i) qs(i, j) = q(i, order[j]);
  }
  return {std::move(qs), std::move(lam)};
}

Matrix solve_subproblem(const Matrix& g_in, double rho) {
  if (rho <= 0.0) throw ZeroRadius("subproblem needs rho > 0");
  Matrix g = g_in;
  symmetrize(g);
  if (max_abs(g) == 0.0) throw ZeroMatrix("subproblem objective is zero");

  auto [q, lam] = jacobi_eigh(g);
  const double gamma = root_search(lam, rho);

  const int d = g.rows;
  Matrix x(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k)
        s += q(i, k) * (gamma / (lam[k] + gamma)) * q(j, k);
      x(i, j) = s;
    }
  symmetrize(x);
  return x;
}

GapResult optimistic_gap(const Matrix& phi, const RoadNetwork& net,
                         const OdSpec& od, const PathVec& z1, double rho,
                         const GapConfig& cfg) {
  const int d = phi.cols;
  GapResult res;
  Rng rng = Rng(cfg.restart_seed).child(seedtag::restarts);

  const Matrix g1 = path_matrix(phi, z1);
  Matrix x = Matrix::identity(d);
  PathVec z_last;
  double h_last = 0.0;
  std::vector<double> c_last;

  // f(X) = <G(z1), X> - min_z <G(z), X> in negated form; every iterate is
  // feasible, so -f at any evaluation lower-bounds the exact gap
  auto evaluate = [&]() {
    c_last = costs_under_metric(phi, x);
    auto sp = dijkstra(net, c_last, od);
    z_last = std::move(sp.first);
    h_last = sp.second;
    res.objective.push_back(h_last - path_cost(c_last, z1));
  };

  int zero_streak = 0;
  bool stale = true;  // x moved since the last evaluate()
  bool done = false;

  for (int k = 0; k < cfg.max_iter && !done; ++k) {
    evaluate();
    stale = false;
    ++res.iterations;

    if (rho <= 0.0) {
      res.terminated_by = GapTermination::zero_radius;
      break;
    }

    Matrix gk = path_matrix(phi, z_last) + (-1.0 * g1);
    if (max_abs(gk) == 0.0) {
      // linearization vanished: the shortest path ties z1, a maximum of f.
      // Restart from a random interior point; two fruitless restarts in a
      // row end the run with the current gap.
      if (++zero_streak >= 3) {
        res.terminated_by = GapTermination::tolerance;
        break;
      }
      x = sample_feasible(rho, d, rng, 0.5);
      stale = true;
      continue;
    }
    zero_streak = 0;

    Matrix x_next = solve_subproblem(gk, rho);
    const double w = frob_inner(gk, x + (-1.0 * x_next));
    res.trace.push_back(w);
    x = std::move(x_next);
    stale = true;
    if (w <= cfg.eps) {
      res.terminated_by = GapTermination::tolerance;
      done = true;
    }
  }

  // descent makes the final iterate at least as good as the last evaluated
  // one, so report the gap there
  if (stale) {
    evaluate();
    if (!done && res.terminated_by == GapTermination::tolerance)
      res.terminated_by = GapTermination::max_iter;
  }

  res.x_final = std::move(x);
  // identical accumulation order makes this exactly zero when z_last == z1
  res.gap_estimate = path_cost(c_last, z1) - h_last;
  res.secondary_path = std::move(z_last);
  return res;
}

}  // namespace optigap
