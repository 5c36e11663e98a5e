#include "optigap/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace optigap {

using nlohmann::json;

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::region: return "region";
    case Strategy::google_primary: return "google_primary";
    case Strategy::google_dual: return "google_dual";
    case Strategy::google_interval: return "google_interval";
    case Strategy::ideal: return "ideal";
    case Strategy::ideal_dual: return "ideal_dual";
  }
  throw Error("unknown strategy enum value");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "region") return Strategy::region;
  if (name == "google_primary") return Strategy::google_primary;
  if (name == "google_dual") return Strategy::google_dual;
  if (name == "google_interval") return Strategy::google_interval;
  if (name == "ideal") return Strategy::ideal;
  if (name == "ideal_dual") return Strategy::ideal_dual;
  throw Error("unknown strategy name: " + name);
}

std::vector<Incident> generate_incidents(const TrafficOracle& w, int n,
                                         std::uint64_t seed) {
  if (n <= 0) throw Error("incident count must be positive");
  Rng rng = Rng(seed).child(seedtag::incidents);
  std::vector<int> pool;
  for (int v = 0; v < int(w.net.node_count()); ++v) {
    if (std::find(w.depots.begin(), w.depots.end(), v) == w.depots.end()) {
      pool.push_back(v);
    }
  }
  if (pool.empty()) throw Error("no non-depot nodes to place incidents on");
  std::vector<Incident> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].time_s = rng.uniform(0.0, w.cfg.horizon_s);
    out[i].dest = pool[rng.below(pool.size())];
  }
  return out;
}

std::vector<ReplayRecord> run_replay(const TrafficOracle& w,
                                     const ModelBundle& models,
                                     const std::vector<Incident>& incidents,
                                     int prefix_q, const GapConfig& dca) {
  if (!models.radius) throw Error("model bundle has no radius head");
  if (w.depots.size() < 2) throw Error("replay needs at least two depots");
  const RoadNetwork& net = w.net;
  const int nd = int(w.depots.size());
  std::vector<ReplayRecord> out;
  out.reserve(incidents.size());
  for (std::size_t i = 0; i < incidents.size(); ++i) {
    const Incident& inc = incidents[i];
    ReplayRecord r;
    r.incident = int(i);
    r.call_time_s = inc.time_s;
    r.dest = inc.dest;
    r.region_depot = w.region[inc.dest];

    std::vector<std::vector<int>> routes(nd);
    r.cand_t.resize(nd);
    r.predicted.resize(nd);
    r.optimistic.resize(nd);
    r.pessimistic.resize(nd);
    for (int k = 0; k < nd; ++k) {
      const OracleReply rep = oracle_query(w, w.depots[k], inc.dest, inc.time_s);
      routes[k] = rep.route;
      r.predicted[k] = rep.duration;
      r.optimistic[k] = rep.optimistic;
      r.pessimistic[k] = rep.pessimistic;
      r.cand_t[k] = adaptive_simulate(w, w.depots[k], inc.dest, inc.time_s).t_final;
    }
    r.google_depot = 0;
    for (int k = 1; k < nd; ++k) {
      if (r.predicted[k] < r.predicted[r.google_depot]) r.google_depot = k;
    }
    r.second_depot = (r.google_depot == 0) ? 1 : 0;
    for (int k = 0; k < nd; ++k) {
      if (k == r.google_depot) continue;
      if (r.predicted[k] < r.predicted[r.second_depot]) r.second_depot = k;
    }

    const std::vector<double> ctx = context_at(w, inc.time_s);
    const Matrix phi = embed_edges(models.rep, net, ctx);
    r.rho = std::max(
        0.0, radius_predict(*models.radius, context_embedding(models.rep, ctx)));

    // the gap is measured for the route the selected provider would drive
    PathVec z1;
    z1.z.assign(net.edge_count(), 0);
    z1.edge_seq = routes[r.google_depot];
    for (int e : z1.edge_seq) z1.z[std::size_t(e)] = 1;
    z1.origin = w.depots[r.google_depot];

    GapConfig cfg = dca;
    cfg.restart_seed = splitmix64(dca.restart_seed ^ (std::uint64_t(i) + 1));
    const OdSpec od = make_od_indices(net, w.depots, inc.dest);
    GapResult gap = optimistic_gap(phi, net, od, z1, r.rho, cfg);
    r.gap_s = std::max(0.0, gap.gap_estimate);
    r.p3_t = hybrid_simulate(w, gap.secondary_path.edge_seq, prefix_q,
                             inc.dest, inc.time_s)
                 .t_final;

    r.t_min = r.p3_t;
    for (double t : r.cand_t) r.t_min = std::min(r.t_min, t);
    out.push_back(std::move(r));
  }
  return out;
}

StrategyEval evaluate_strategy(const ReplayRecord& r, Strategy s, double thr) {
  StrategyEval ev;
  const double tg = r.cand_t[std::size_t(r.google_depot)];
  const double to = r.cand_t[std::size_t(r.second_depot)];
  switch (s) {
    case Strategy::region:
      ev.t = r.cand_t[std::size_t(r.region_depot)];
      ev.dispatched = 1;
      break;
    case Strategy::google_primary:
      ev.t = tg;
      ev.dispatched = 1;
      break;
    case Strategy::google_dual:
      ev.t = std::min(tg, to);
      ev.dispatched = 2;
      break;
    case Strategy::google_interval: {
      const double spread = r.pessimistic[std::size_t(r.google_depot)] -
                            r.optimistic[std::size_t(r.second_depot)];
      if (spread > thr) {
        ev.t = std::min(tg, to);
        ev.dispatched = 2;
      } else {
        ev.t = tg;
        ev.dispatched = 1;
      }
      break;
    }
    case Strategy::ideal:
      if (r.gap_s > thr) {
        ev.t = std::min(tg, r.p3_t);
        ev.dispatched = 2;
      } else {
        ev.t = tg;
        ev.dispatched = 1;
      }
      break;
    case Strategy::ideal_dual:
      ev.t = std::min(tg, r.p3_t);
      ev.dispatched = 2;
      break;
  }
  return ev;
}

double cvar(std::vector<double> values, double alpha) {
  if (values.empty()) throw Empty("cvar of an empty sample");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("cvar level must be in [0, 1)");
  std::sort(values.begin(), values.end(), std::greater<double>());
  const std::size_t k =
      std::size_t(std::ceil((1.0 - alpha) * double(values.size())));
  const std::size_t m = std::max<std::size_t>(1, std::min(k, values.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += values[i];
  return s / double(m);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Empty("percentile of an empty sample");
  if (!(p > 0.0 && p <= 1.0)) throw Error("percentile level must be in (0, 1]");
  std::sort(values.begin(), values.end());
  std::size_t rank = std::size_t(std::ceil(p * double(values.size())));
  if (rank < 1) rank = 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

namespace {

struct SignedRanks {
  std::vector<double> ranks;  // aligned with kept diffs
  std::vector<bool> positive;
  double w_obs = 0.0;
  std::vector<int> tie_groups;  // sizes of tied |d| runs
};

SignedRanks signed_ranks(const std::vector<double>& diffs) {
  std::vector<double> kept;
  for (double d : diffs) {
    if (d != 0.0) kept.push_back(d);
  }
  if (kept.empty()) throw AllZero("all differences are zero");
  const std::size_t n = kept.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(kept[a]) < std::fabs(kept[b]);
  });
  SignedRanks out;
  out.ranks.assign(n, 0.0);
  out.positive.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) out.positive[i] = kept[i] > 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(kept[idx[j + 1]]) == std::fabs(kept[idx[i]])) {
      ++j;
    }
    // ranks i+1 .. j+1 averaged; the sum is exact so the mean is a multiple
    // of 0.5 and representable
    const double avg = double(i + 1 + j + 1) / 2.0;
    for (std::size_t k = i; k <= j; ++k) out.ranks[idx[k]] = avg;
    out.tie_groups.push_back(int(j - i + 1));
    i = j + 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (out.positive[k]) out.w_obs += out.ranks[k];
  }
  return out;
}

double exact_p_from_ranks(const SignedRanks& sr) {
  const std::size_t n = sr.ranks.size();
  if (n > 20) throw TooLarge("exact enumeration limited to 20 differences");
  const std::uint64_t total = std::uint64_t(1) << n;
  std::uint64_t count = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (mask & (std::uint64_t(1) << k)) w += sr.ranks[k];
    }
    if (w >= sr.w_obs) ++count;
  }
  return double(count) / double(total);
}

double normal_p_from_ranks(const SignedRanks& sr) {
  const double n = double(sr.ranks.size());
  const double mu = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  for (int t : sr.tie_groups) {
    const double td = double(t);
    tie_term += (td * td * td - td) / 48.0;
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
  if (!(var > 0.0)) throw Error("degenerate rank variance");
  const double z = (sr.w_obs - mu - 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

void mean_ci(const std::vector<double>& diffs, WilcoxonResult& r) {
  const double n = double(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double s2 = 0.0;
  for (double d : diffs) s2 += (d - mean) * (d - mean);
  const double sd = (diffs.size() > 1) ? std::sqrt(s2 / (n - 1.0)) : 0.0;
  const double se = sd / std::sqrt(n);
  r.mean_diff = mean;
  r.ci_lo = mean - 1.96 * se;
  r.ci_hi = mean + 1.96 * se;
}

}  // namespace

double wilcoxon_exact_p(const std::vector<double>& diffs) {
  return exact_p_from_ranks(signed_ranks(diffs));
}

double wilcoxon_normal_p(const std::vector<double>& diffs) {
  return normal_p_from_ranks(signed_ranks(diffs));
}

WilcoxonResult wilcoxon_one_sided(const std::vector<double>& diffs) {
  if (diffs.empty()) throw Empty("wilcoxon of an empty sample");
  const SignedRanks sr = signed_ranks(diffs);
  WilcoxonResult r;
  r.n = int(diffs.size());
  r.n_nonzero = int(sr.ranks.size());
  r.w = sr.w_obs;
  r.p = (sr.ranks.size() <= 12) ? exact_p_from_ranks(sr)
                                : normal_p_from_ranks(sr);
  mean_ci(diffs, r);
  return r;
}

namespace {

MetricsRow make_row(const std::vector<ReplayRecord>& records, Strategy s,
                    bool has_thr, double thr) {
  MetricsRow row;
  row.strategy = strategy_name(s);
  row.has_thr = has_thr;
  row.thr = thr;
  std::vector<double> ts;
  ts.reserve(records.size());
  double a_sum = 0.0;
  double opt = 0.0;
  for (const ReplayRecord& r : records) {
    const StrategyEval ev = evaluate_strategy(r, s, thr);
    ts.push_back(ev.t);
    a_sum += double(ev.dispatched);
    if (ev.t == r.t_min) opt += 1.0;
  }
  const double n = double(records.size());
  double mean = 0.0;
  for (double t : ts) mean += t;
  row.mean = mean / n;
  row.a_bar = a_sum / n;
  row.p95 = percentile(ts, 0.95);
  row.p99 = percentile(ts, 0.99);
  row.cvar95 = cvar(ts, 0.95);
  row.cvar99 = cvar(ts, 0.99);
  row.cand_opt_rate = opt / n;
  return row;
}

}  // namespace

std::vector<MetricsRow> metrics_table(const std::vector<ReplayRecord>& records,
                                      const std::vector<double>& thr_grid) {
  if (records.empty()) throw Empty("metrics of an empty replay");
  std::vector<MetricsRow> rows;
  rows.push_back(make_row(records, Strategy::region, false, 0.0));
  rows.push_back(make_row(records, Strategy::google_primary, false, 0.0));
  rows.push_back(make_row(records, Strategy::google_dual, false, 0.0));
  for (double thr : thr_grid) {
    rows.push_back(make_row(records, Strategy::google_interval, true, thr));
  }
  for (double thr : thr_grid) {
    rows.push_back(make_row(records, Strategy::ideal, true, thr));
  }
  rows.push_back(make_row(records, Strategy::ideal_dual, false, 0.0));
  return rows;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "strategy,thr,a_bar,mean,p95,p99,cvar95,cvar99,cand_opt_rate\n";
  for (const MetricsRow& r : rows) {
    out += r.strategy;
    out += ',';
    if (r.has_thr) out += fmt_g(r.thr);
    out += ',';
    out += fmt_g(r.a_bar);
    out += ',';
    out += fmt_g(r.mean);
    out += ',';
    out += fmt_g(r.p95);
    out += ',';
    out += fmt_g(r.p99);
    out += ',';
    out += fmt_g(r.cvar95);
    out += ',';
    out += fmt_g(r.cvar99);
    out += ',';
    out += fmt_g(r.cand_opt_rate);
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> sweep(const std::vector<ReplayRecord>& records,
                            const std::vector<double>& grid) {
  if (records.empty()) throw Empty("sweep of an empty replay");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double thr : grid) {
    SweepRow row;
    row.thr = thr;
    std::vector<double> regret;
    regret.reserve(records.size());
    double a_sum = 0.0;
    for (const ReplayRecord& r : records) {
      const StrategyEval ev = evaluate_strategy(r, Strategy::ideal, thr);
      regret.push_back(ev.t - r.t_min);
      a_sum += double(ev.dispatched);
    }
    const double n = double(records.size());
    double mean = 0.0;
    for (double g : regret) mean += g;
    row.mean_regret = mean / n;
    row.a_bar = a_sum / n;
    row.cvar95 = cvar(regret, 0.95);
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "thr,a_bar,mean_regret,cvar95\n";
  for (const SweepRow& r : rows) {
    out += fmt_g(r.thr);
    out += ',';
    out += fmt_g(r.a_bar);
    out += ',';
    out += fmt_g(r.mean_regret);
    out += ',';
    out += fmt_g(r.cvar95);
    out += '\n';
  }
  return out;
}

std::string wilcoxon_csv(const std::vector<ReplayRecord>& records,
                         const std::vector<double>& thr_grid) {
  if (records.empty()) throw Empty("wilcoxon of an empty replay");
  std::vector<std::pair<std::string, std::vector<double>>> tables;
  auto diffs_against_dual = [&](Strategy s, double thr) {
    std::vector<double> d;
    d.reserve(records.size());
    for (const ReplayRecord& r : records) {
      const double base = evaluate_strategy(r, s, thr).t;
      const double dual = evaluate_strategy(r, Strategy::ideal_dual, 0.0).t;
      d.push_back(base - dual);
    }
    return d;
  };
  tables.emplace_back("region", diffs_against_dual(Strategy::region, 0.0));
  tables.emplace_back("google_primary",
                      diffs_against_dual(Strategy::google_primary, 0.0));
  tables.emplace_back("google_dual",
                      diffs_against_dual(Strategy::google_dual, 0.0));
  for (double thr : thr_grid) {
    tables.emplace_back("google_interval@" + fmt_g(thr),
                        diffs_against_dual(Strategy::google_interval, thr));
  }
  std::string out = "baseline,n,n_nonzero,mean_diff,ci_lo,ci_hi,W,p\n";
  for (auto& [name, diffs] : tables) {
    out += name;
    out += ',';
    bool all_zero = true;
    for (double d : diffs) {
      if (d != 0.0) { all_zero = false; break; }
    }
    if (all_zero) {
      // the baseline never deviates from the dual; no test to run
      WilcoxonResult r;
      mean_ci(diffs, r);
      out += fmt_g(double(diffs.size()));
      out += ",0,";
      out += fmt_g(r.mean_diff);
      out += ',';
      out += fmt_g(r.ci_lo);
      out += ',';
      out += fmt_g(r.ci_hi);
      out += ",0,1\n";
      continue;
    }
    const WilcoxonResult r = wilcoxon_one_sided(diffs);
    out += fmt_g(double(r.n));
    out += ',';
    out += fmt_g(double(r.n_nonzero));
    out += ',';
    out += fmt_g(r.mean_diff);
    out += ',';
    out += fmt_g(r.ci_lo);
    out += ',';
    out += fmt_g(r.ci_hi);
    out += ',';
    out += fmt_g(r.w);
    out += ',';
    out += fmt_g(r.p);
    out += '\n';
  }
  return out;
}

namespace {

json record_to_json(const ReplayRecord& r) {
  json j;
  j["incident"] = r.incident;
  j["call_time_s"] = r.call_time_s;
  j["dest"] = r.dest;
  j["cand_t"] = r.cand_t;
  j["predicted"] = r.predicted;
  j["optimistic"] = r.optimistic;
  j["pessimistic"] = r.pessimistic;
  j["google_depot"] = r.google_depot;
  j["second_depot"] = r.second_depot;
  j["region_depot"] = r.region_depot;
  j["p3_t"] = r.p3_t;
  j["gap_s"] = r.gap_s;
  j["rho"] = r.rho;
  j["t_min"] = r.t_min;
  return j;
}

ReplayRecord record_from_json(const json& j) {
  ReplayRecord r;
  r.incident = j.at("incident").get<int>();
  r.call_time_s = j.at("call_time_s").get<double>();
  r.dest = j.at("dest").get<int>();
  r.cand_t = j.at("cand_t").get<std::vector<double>>();
  r.predicted = j.at("predicted").get<std::vector<double>>();
  r.optimistic = j.at("optimistic").get<std::vector<double>>();
  r.pessimistic = j.at("pessimistic").get<std::vector<double>>();
  r.google_depot = j.at("google_depot").get<int>();
  r.second_depot = j.at("second_depot").get<int>();
  r.region_depot = j.at("region_depot").get<int>();
  r.p3_t = j.at("p3_t").get<double>();
  r.gap_s = j.at("gap_s").get<double>();
  r.rho = j.at("rho").get<double>();
  r.t_min = j.at("t_min").get<double>();
  return r;
}

}  // namespace

std::string records_to_jsonl(const std::vector<ReplayRecord>& records) {
  std::string out;
  for (const ReplayRecord& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<ReplayRecord> records_from_jsonl(const std::string& text) {
  std::vector<ReplayRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(json::parse(line)));
  }
  return out;
}

}  // namespace optigap
