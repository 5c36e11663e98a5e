#include "optigap/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "optigap/dca.hpp"
#include "optigap/scenario.hpp"

namespace optigap {

namespace {

constexpr double kPi = 3.14159265358979323846;

// best q2*l2 + q3*l3 subject to kappa(l2) + kappa(l3) <= budget, via ternary
// search on l2 (the objective is concave along l2); l3 takes the branch its
// coefficient points to
double pair_best(double q2, double q3, double budget) {
  if (budget <= 0.0) return q2 + q3;  // both eigenvalues pinned at 1
  auto l3_best = [&](double rest) {
    return kappa_inverse(rest, q3 < 0.0);
  };
  auto value = [&](double l2) {
    const double used = kappa(l2);
    return q2 * l2 + q3 * l3_best(budget - used);
  };
  double lo = kappa_inverse(budget, true);
  double hi = kappa_inverse(budget, false);
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (value(m1) < value(m2)) lo = m1; else hi = m2;
  }
  return value(0.5 * (lo + hi));
}

// best sum q_i * l_i subject to sum kappa(l_i) <= rho for up to three
// coefficients; concave nested ternary
double spectrum_best(const std::vector<double>& q, double rho) {
  if (q.size() == 1) {
    const auto [m, M] = eig_interval(rho);
    return std::max(q[0] * m, q[0] * M);
  }
  if (q.size() == 2) return pair_best(q[0], q[1], rho);

  auto value = [&](double l1) {
    return q[0] * l1 + pair_best(q[1], q[2], rho - kappa(l1));
  };
  double lo = kappa_inverse(rho, true);
  double hi = kappa_inverse(rho, false);
  for (int it = 0; it < 70; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (value(m1) < value(m2)) lo = m1; else hi = m2;
  }
  return value(0.5 * (lo + hi));
}

// diagonal of R(alpha)^T A R(alpha) for 2x2
std::vector<double> rayleigh2(const Matrix& a, double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  const double q1 = c * c * a(0, 0) + 2.0 * c * s * a(0, 1) + s * s * a(1, 1);
  const double q2 = s * s * a(0, 0) - 2.0 * c * s * a(0, 1) + c * c * a(1, 1);
  return {q1, q2};
}

Matrix rotation3(double za, double yb, double zc) {
  auto rz = [](double t) {
    Matrix r = Matrix::identity(3);
    r(0, 0) = std::cos(t); r(0, 1) = -std::sin(t);
    r(1, 0) = std::sin(t); r(1, 1) = std::cos(t);
    return r;
  };
  Matrix ry = Matrix::identity(3);
  ry(0, 0) = std::cos(yb); ry(0, 2) = std::sin(yb);
  ry(2, 0) = -std::sin(yb); ry(2, 2) = std::cos(yb);
  return matmul(matmul(rz(za), ry), rz(zc));
}

std::vector<double> rayleigh3(const Matrix& a, const Matrix& q) {
  std::vector<double> out(3);
  for (int j = 0; j < 3; ++j) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) s += q(i, j) * a(i, k) * q(k, j);
    out[j] = s;
  }
  return out;
}

double grid_max_linear2(const Matrix& a, double rho) {
  auto value = [&](double alpha) {
    return spectrum_best(rayleigh2(a, alpha), rho);
  };
  double best = -std::numeric_limits<double>::infinity();
  double best_alpha = 0.0;
  const int coarse = 256;
  for (int i = 0; i < coarse; ++i) {
    const double alpha = kPi * double(i) / double(coarse);
    const double v = value(alpha);
    if (v > best) { best = v; best_alpha = alpha; }
  }
  double span = kPi / double(coarse);
  for (int round = 0; round < 5; ++round) {
    const int pts = 33;
    double rb = best, ra = best_alpha;
    for (int i = 0; i < pts; ++i) {
      const double alpha =
          best_alpha - span + 2.0 * span * double(i) / double(pts - 1);
      const double v = value(alpha);
      if (v > rb) { rb = v; ra = alpha; }
    }
    best = rb;
    best_alpha = ra;
    span /= 8.0;
  }
  return best;
}

double grid_max_linear3(const Matrix& a, double rho) {
  auto value = [&](double za, double yb, double zc) {
    return spectrum_best(rayleigh3(a, rotation3(za, yb, zc)), rho);
  };
  double best = -std::numeric_limits<double>::infinity();
  double ba = 0.0, bb = 0.0, bc = 0.0;
  const int na = 12, nb = 7, nc = 12;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      for (int k = 0; k < nc; ++k) {
        const double za = 2.0 * kPi * double(i) / double(na);
        const double yb = kPi * double(j) / double(nb - 1);
        const double zc = 2.0 * kPi * double(k) / double(nc);
        const double v = value(za, yb, zc);
        if (v > best) { best = v; ba = za; bb = yb; bc = zc; }
      }
  double sa = 2.0 * kPi / na, sb = kPi / (nb - 1), sc = 2.0 * kPi / nc;
  for (int round = 0; round < 5; ++round) {
    const int pts = 7;
    double rb = best, ra1 = ba, ra2 = bb, ra3 = bc;
    for (int i = 0; i < pts; ++i)
      for (int j = 0; j < pts; ++j)
        for (int k = 0; k < pts; ++k) {
          const double za = ba - sa + 2.0 * sa * double(i) / double(pts - 1);
          const double yb = bb - sb + 2.0 * sb * double(j) / double(pts - 1);
          const double zc = bc - sc + 2.0 * sc * double(k) / double(pts - 1);
          const double v = value(za, yb, zc);
          if (v > rb) { rb = v; ra1 = za; ra2 = yb; ra3 = zc; }
        }
    best = rb; ba = ra1; bb = ra2; bc = ra3;
    sa /= 6.0; sb /= 6.0; sc /= 6.0;
  }
  return best;
}

}  // namespace

double grid_max_linear(const Matrix& a, double rho) {
  const int d = a.rows;
  if (d > 3) throw TooLarge("grid maximizer is limited to d <= 3");
  if (rho < 0.0) throw ZeroRadius("grid maximizer needs rho >= 0");
  double tr = 0.0;
  for (int i = 0; i < d; ++i) tr += a(i, i);
  if (rho == 0.0 || max_abs(a) == 0.0) return tr;  // ball collapses / A = 0
  if (d == 1) return spectrum_best({a(0, 0)}, rho);
  const double best =
      d == 2 ? grid_max_linear2(a, rho) : grid_max_linear3(a, rho);
  return std::max(best, tr);  // identity is always feasible
}

double delta_grid(const Matrix& phi, const RoadNetwork& net, const OdSpec& od,
                  const PathVec& z1, double rho) {
  const Matrix g1 = path_matrix(phi, z1);
  double best = 0.0;  // z = z1 gives exactly 0
  for (const PathVec& z : enumerate_simple_paths(net, od)) {
    const Matrix diff = g1 + (-1.0 * path_matrix(phi, z));
    if (max_abs(diff) == 0.0) continue;
    best = std::max(best, grid_max_linear(diff, rho));
  }
  return best;
}

double grid_max_min_cost(const Matrix& phi, const RoadNetwork& net,
                         const OdSpec& od, double rho) {
  if (phi.cols != 2) throw TooLarge("max-min grid supports d = 2 only");
  const std::vector<PathVec> paths = enumerate_simple_paths(net, od);
  std::vector<Matrix> gs;
  gs.reserve(paths.size());
  for (const PathVec& z : paths) gs.push_back(path_matrix(phi, z));

  auto min_cost = [&](const Matrix& x) {
    double m = std::numeric_limits<double>::infinity();
    for (const Matrix& g : gs) m = std::min(m, frob_inner(g, x));
    return m;
  };
  auto assemble = [&](double alpha, double l1, double l2) {
    const double c = std::cos(alpha), s = std::sin(alpha);
    Matrix x(2, 2);
    x(0, 0) = c * c * l1 + s * s * l2;
    x(1, 1) = s * s * l1 + c * c * l2;
    x(0, 1) = c * s * (l1 - l2);
    x(1, 0) = x(0, 1);
    return x;
  };

  // every path matrix is PSD, so the min cost is nondecreasing in each
  // eigenvalue: the maximum sits on the boundary kappa(l1) + kappa(l2) = rho
  // with both eigenvalues on the upper branch; search (rotation, budget
  // split) directly on that arc
  auto upper = [](double budget) {
    return budget <= 0.0 ? 1.0 : kappa_inverse(budget, false);
  };

  double best = min_cost(Matrix::identity(2));
  double ba = 0.0, bs = 0.5;
  const int na = 96, ns = 97;
  for (int j = 0; j < ns; ++j) {
    const double s = double(j) / double(ns - 1);
    const double l1 = upper(s * rho), l2 = upper((1.0 - s) * rho);
    for (int i = 0; i < na; ++i) {
      const double alpha = kPi * double(i) / double(na);
      const double v = min_cost(assemble(alpha, l1, l2));
      if (v > best) { best = v; ba = alpha; bs = s; }
    }
  }
  double sa = kPi / na, ss = 1.0 / (ns - 1);
  for (int round = 0; round < 6; ++round) {
    const int pts = 13;
    double rb = best, ra = ba, rs = bs;
    for (int j = 0; j < pts; ++j) {
      const double s =
          std::clamp(bs - ss + 2.0 * ss * double(j) / double(pts - 1), 0.0,
                     1.0);
      const double l1 = upper(s * rho), l2 = upper((1.0 - s) * rho);
      for (int i = 0; i < pts; ++i) {
        const double alpha = ba - sa + 2.0 * sa * double(i) / double(pts - 1);
        const double v = min_cost(assemble(alpha, l1, l2));
        if (v > rb) { rb = v; ra = alpha; rs = s; }
      }
    }
    best = rb; ba = ra; bs = rs;
    sa /= 6.0; ss /= 6.0;
  }
  return best;
}

double target_radius_bisect(const Matrix& phi, const RoadNetwork& net,
                            const OdSpec& od, double t) {
  const std::vector<double> c_hat = edge_costs(phi);
  auto [z0, h_hat] = dijkstra(net, c_hat, od);
  (void)z0;
  if (h_hat >= t) return 0.0;

  double lo = 0.0, hi = 1.0;
  while (grid_max_min_cost(phi, net, od, hi) < t) {
    hi *= 2.0;
    if (hi > 1e6) throw UnboundedRadius("no radius reaches the target time");
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (grid_max_min_cost(phi, net, od, mid) < t ? lo : hi) = mid;
    if (hi - lo <= 1e-6) break;
  }
  return 0.5 * (lo + hi);
}

std::pair<PathVec, double> bellman_ford(const RoadNetwork& net,
                                        const std::vector<double>& costs,
                                        const OdSpec& od) {
  const int n = net.node_count();
  const double inf = std::numeric_limits<double>::infinity();

  PathVec best_path;
  double best_val = inf;
  for (int origin : od.origins) {
    std::vector<double> dist(std::size_t(n), inf);
    std::vector<int> pred(std::size_t(n), -1);  // incoming edge index
    dist[std::size_t(origin)] = 0.0;
    for (int pass = 0; pass < n - 1; ++pass) {
      bool changed = false;
      for (int e = 0; e < net.edge_count(); ++e) {
        const int u = net.edges[std::size_t(e)].from;
        const int v = net.edges[std::size_t(e)].to;
        if (dist[std::size_t(u)] == inf) continue;
        const double cand = dist[std::size_t(u)] + costs[std::size_t(e)];
        if (cand < dist[std::size_t(v)]) {
          dist[std::size_t(v)] = cand;
          pred[std::size_t(v)] = e;
          changed = true;
        }
      }
      if (!changed) break;
    }
    if (dist[std::size_t(od.dest)] < best_val) {
      best_val = dist[std::size_t(od.dest)];
      PathVec p;
      p.origin = origin;
      p.z.assign(std::size_t(net.edge_count()), 0);
      for (int v = od.dest; v != origin;) {
        const int e = pred[std::size_t(v)];
        p.edge_seq.push_back(e);
        p.z[std::size_t(e)] = 1;
        v = net.edges[std::size_t(e)].from;
      }
      std::reverse(p.edge_seq.begin(), p.edge_seq.end());
      best_path = std::move(p);
    }
  }
  if (best_val == inf) throw Unreachable("destination unreachable");
  // forward re-accumulation in path order, matching dijkstra's convention
  double val = 0.0;
  for (int e : best_path.edge_seq) val += costs[std::size_t(e)];
  return {std::move(best_path), val};
}

double gamma_bisect(const std::vector<double>& eigs, double rho) {
  auto [gamma0, gamma_max] = gamma_bounds(eigs, rho);
  double hi = gamma_max;
  while (gamma_residual(eigs, rho, hi) > 0.0) hi *= 2.0;
  double lo = gamma0;
  // shift lo inside the domain: residual must be positive there
  double step = 1e-12 * std::max(1.0, hi - gamma0);
  while (gamma_residual(eigs, rho, gamma0 + step) < 0.0) step *= 0.5;
  lo = gamma0 + step * 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gamma_residual(eigs, rho, mid) > 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> wilcoxon_enumerate(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0.0) d.push_back(x);
  if (d.empty()) throw AllZero("all differences are zero");
  const int n = int(d.size());
  if (n > 20) throw TooLarge("enumeration oracle is limited to n <= 20");

  // average ranks of |d|
  std::vector<int> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) {
    return std::fabs(d[std::size_t(i)]) < std::fabs(d[std::size_t(j)]);
  });
  std::vector<double> rank(d.size(), 0.0);
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() &&
           std::fabs(d[std::size_t(idx[j])]) == std::fabs(d[std::size_t(idx[i])]))
      ++j;
    const double avg = 0.5 * double(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank[std::size_t(idx[k])] = avg;
    i = j;
  }

  double w_obs = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) w_obs += rank[i];

  std::uint64_t count = 0;
  const std::uint64_t total = std::uint64_t(1) << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (std::uint64_t(1) << i)) w += rank[std::size_t(i)];
    if (w >= w_obs - 1e-12) ++count;
  }
  return {w_obs, double(count) / double(total)};
}

namespace {

double frozen_objective(const RepresentationModel& m, const RoadNetwork& net,
                        const std::vector<double>& context, const PathVec& z,
                        double t_obs, LossKind loss, double huber_delta,
                        double beta) {
  const Matrix phi = embed_edges(m, net, context);
  const std::vector<double> c = edge_costs(phi);
  double pred = 0.0;
  for (int e : z.edge_seq) pred += c[std::size_t(e)];
  double val = loss_value(loss, huber_delta, pred, t_obs);
  if (beta != 0.0) val += beta * regularizer(m, net).value;
  return val;
}

}  // namespace

std::vector<double> fd_gradient_path(const RepresentationModel& m,
                                     const RoadNetwork& net,
                                     const std::vector<double>& context,
                                     const PathVec& z, double t_obs,
                                     LossKind loss, double huber_delta,
                                     double beta, double h) {
  const std::size_t n = param_count(m);
  std::vector<double> g(n);
  std::vector<double> dir(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    dir[i] = 1.0;
    RepresentationModel plus = m, minus = m;
    add_flat(plus, dir, h);
    add_flat(minus, dir, -h);
    dir[i] = 0.0;
    g[i] = (frozen_objective(plus, net, context, z, t_obs, loss, huber_delta,
                             beta) -
            frozen_objective(minus, net, context, z, t_obs, loss, huber_delta,
                             beta)) /
           (2.0 * h);
  }
  return g;
}

std::vector<double> fd_gradient_regularizer(const RepresentationModel& m,
                                            const RoadNetwork& net, double h) {
  const std::size_t n = param_count(m);
  std::vector<double> g(n);
  std::vector<double> dir(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    dir[i] = 1.0;
    RepresentationModel plus = m, minus = m;
    add_flat(plus, dir, h);
    add_flat(minus, dir, -h);
    dir[i] = 0.0;
    g[i] = (regularizer(plus, net).value - regularizer(minus, net).value) /
           (2.0 * h);
  }
  return g;
}

}  // namespace optigap
