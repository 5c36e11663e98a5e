#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "doctest.h"
#include "optigap/evalkit.hpp"
#include "optigap/nets.hpp"
#include "optigap/simworld.hpp"
#include "test_util.hpp"

using namespace optigap;

namespace {

// realized {100, 80}, predicted picks depot 0, secondary hybrid lands at 70
ReplayRecord hand_record(double gap) {
  ReplayRecord r;
  r.incident = 0;
  r.call_time_s = 0.0;
  r.dest = 3;
  r.cand_t = {100.0, 80.0};
  r.predicted = {95.0, 105.0};
  r.optimistic = {90.0, 72.0};
  r.pessimistic = {115.0, 92.0};
  r.google_depot = 0;
  r.second_depot = 1;
  r.region_depot = 1;
  r.p3_t = 70.0;
  r.gap_s = gap;
  r.rho = 0.4;
  r.t_min = 70.0;
  return r;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("tail means sit at or above the matching percentile") {
  CHECK(cvar({5.0, 5.0, 5.0}, 0.9) == 5.0);
  CHECK(cvar({0.0, 0.0, 0.0, 100.0}, 0.75) == 100.0);
  const std::vector<double> v{3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  CHECK(cvar(v, 0.0) == doctest::Approx(mean).epsilon(1e-12));

  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> vals;
    const int n = 3 + int(rng.below(40));
    for (int i = 0; i < n; ++i) vals.push_back(rng.uniform(-5.0, 50.0));
    for (double alpha : {0.5, 0.9, 0.95}) {
      CHECK(cvar(vals, alpha) + 1e-9 >= percentile(vals, alpha));
    }
  }

  CHECK_THROWS_AS(cvar({}, 0.95), Empty);
  CHECK_THROWS_AS(cvar({1.0}, 1.0), Error);
  CHECK_THROWS_AS(cvar({1.0}, -0.1), Error);
}

TEST_CASE("nearest-rank percentiles hit exact order statistics") {
  std::vector<double> v;
  for (int i = 10; i >= 1; --i) v.push_back(double(i));
  CHECK(percentile(v, 0.5) == 5.0);
  CHECK(percentile(v, 1.0) == 10.0);
  CHECK(percentile(v, 0.05) == 1.0);
  CHECK_THROWS_AS(percentile(v, 0.0), Error);
  CHECK_THROWS_AS(percentile(v, 1.5), Error);
  CHECK_THROWS_AS(percentile({}, 0.5), Error);
}

TEST_CASE("signed-rank statistics match hand enumeration") {
  const WilcoxonResult all_pos =
      wilcoxon_one_sided({3.0, 1.0, 4.0, 1.5, 5.0, 9.0});
  CHECK(all_pos.w == 21.0);
  CHECK(all_pos.p == doctest::Approx(1.0 / 64.0).epsilon(1e-12));
  CHECK(all_pos.n_nonzero == 6);

  const WilcoxonResult three = wilcoxon_one_sided({1.0, 2.0, 3.0});
  CHECK(three.w == 6.0);
  CHECK(three.p == doctest::Approx(0.125).epsilon(1e-12));

  // zeros are discarded before ranking
  const WilcoxonResult zeros = wilcoxon_one_sided({0.0, 0.0, 1.0, 2.0});
  CHECK(zeros.n_nonzero == 2);
  CHECK(zeros.w == 3.0);
  CHECK(zeros.p == doctest::Approx(0.25).epsilon(1e-12));

  // symmetric differences put the statistic at its null mean
  const WilcoxonResult sym = wilcoxon_one_sided(
      {1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0});
  CHECK(sym.w == 18.0);  // tied magnitudes get averaged ranks
  CHECK(sym.p >= 0.5);
  CHECK(sym.p <= 0.57);

  CHECK_THROWS_AS(wilcoxon_one_sided({0.0, 0.0, 0.0}), AllZero);
}

TEST_CASE("the exact and normal p-value routes agree where they meet") {
  std::vector<double> diffs;
  for (int i = 1; i <= 11; ++i) diffs.push_back(double(i));
  diffs.push_back(-12.0);
  const WilcoxonResult exact = wilcoxon_one_sided(diffs);
  CHECK(exact.n_nonzero == 12);
  CHECK(exact.p == wilcoxon_exact_p(diffs));
  CHECK(std::fabs(exact.p - wilcoxon_normal_p(diffs)) <= 0.02);

  diffs.push_back(13.0);  // 13 nonzero values switch to the normal route
  const WilcoxonResult big = wilcoxon_one_sided(diffs);
  CHECK(big.n_nonzero == 13);
  CHECK(big.p == wilcoxon_normal_p(diffs));
}

TEST_CASE("each strategy reads the hand-built record as designed") {
  const ReplayRecord r = hand_record(50.0);

  const StrategyEval region = evaluate_strategy(r, Strategy::region, 0.0);
  CHECK(region.t == 80.0);
  CHECK(region.dispatched == 1);

  const StrategyEval primary =
      evaluate_strategy(r, Strategy::google_primary, 0.0);
  CHECK(primary.t == 100.0);
  CHECK(primary.dispatched == 1);

  const StrategyEval dual = evaluate_strategy(r, Strategy::google_dual, 0.0);
  CHECK(dual.t == 80.0);
  CHECK(dual.dispatched == 2);

  // interval spread: pessimistic(selected) - optimistic(other) = 115 - 72
  const StrategyEval iv_hi =
      evaluate_strategy(r, Strategy::google_interval, 50.0);
  CHECK(iv_hi.t == 100.0);
  CHECK(iv_hi.dispatched == 1);
  const StrategyEval iv_lo =
      evaluate_strategy(r, Strategy::google_interval, 40.0);
  CHECK(iv_lo.t == 80.0);
  CHECK(iv_lo.dispatched == 2);

  const StrategyEval gap_hi = evaluate_strategy(r, Strategy::ideal, 60.0);
  CHECK(gap_hi.t == 100.0);
  CHECK(gap_hi.dispatched == 1);
  const StrategyEval gap_lo = evaluate_strategy(r, Strategy::ideal, 40.0);
  CHECK(gap_lo.t == 70.0);
  CHECK(gap_lo.dispatched == 2);
  // the threshold comparison is strict, so an exact tie stays single
  const StrategyEval gap_tie = evaluate_strategy(r, Strategy::ideal, 50.0);
  CHECK(gap_tie.t == 100.0);
  CHECK(gap_tie.dispatched == 1);

  const StrategyEval always = evaluate_strategy(r, Strategy::ideal_dual, 0.0);
  CHECK(always.t == 70.0);
  CHECK(always.dispatched == 2);
}

TEST_CASE("strategy names round trip") {
  for (Strategy s : {Strategy::region, Strategy::google_primary,
                     Strategy::google_dual, Strategy::google_interval,
                     Strategy::ideal, Strategy::ideal_dual}) {
    CHECK(strategy_from_name(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(strategy_from_name("nonsense"), Error);
}

TEST_CASE("threshold sweeps trade dispatches against regret monotonically") {
  const std::vector<ReplayRecord> records{hand_record(10.0), hand_record(20.0),
                                          hand_record(30.0)};
  const std::vector<double> grid{0.0, 15.0, 25.0, 1e18};
  const std::vector<SweepRow> rows = sweep(records, grid);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].a_bar == 2.0);
  CHECK(rows[0].mean_regret == 0.0);
  CHECK(rows[1].a_bar == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(rows[1].mean_regret == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(rows[2].a_bar == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(rows[2].mean_regret == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(rows[3].a_bar == 1.0);
  CHECK(rows[3].mean_regret == 30.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].a_bar <= rows[i - 1].a_bar);
    CHECK(rows[i].mean_regret >= rows[i - 1].mean_regret);
  }
  CHECK_THROWS_AS(sweep({}, grid), Empty);

  const std::string csv = sweep_csv(rows);
  CHECK(lines(csv).front() == "thr,a_bar,mean_regret,cvar95");
}

TEST_CASE("metrics tables carry one row per strategy and grid point") {
  const std::vector<ReplayRecord> records{hand_record(10.0), hand_record(20.0),
                                          hand_record(30.0)};
  const std::vector<MetricsRow> rows = metrics_table(records, {0.0, 25.0});
  REQUIRE(rows.size() == 8);

  int with_thr = 0;
  for (const MetricsRow& row : rows) {
    if (row.has_thr) ++with_thr;
    CHECK(row.a_bar >= 1.0);
    CHECK(row.a_bar <= 2.0);
    CHECK(row.mean >= 70.0);
    CHECK(row.mean <= 100.0);
  }
  CHECK(with_thr == 4);  // two thresholded strategies, two grid points

  const auto find = [&](const std::string& name,
                        double thr) -> const MetricsRow& {
    for (const MetricsRow& row : rows)
      if (row.strategy == name && (!row.has_thr || row.thr == thr)) return row;
    REQUIRE(false);
    return rows.front();
  };
  CHECK(find("google_primary", 0.0).mean == 100.0);
  CHECK(find("google_primary", 0.0).cand_opt_rate == 0.0);
  CHECK(find("ideal_dual", 0.0).mean == 70.0);
  CHECK(find("ideal_dual", 0.0).cand_opt_rate == 1.0);
  CHECK(find("ideal", 0.0).a_bar == 2.0);
  CHECK(find("ideal", 25.0).a_bar == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  const std::string csv = metrics_csv(rows);
  CHECK(lines(csv).front() ==
        "strategy,thr,a_bar,mean,p95,p99,cvar95,cvar99,cand_opt_rate");
  CHECK(lines(csv).size() == 1 + rows.size());
}

TEST_CASE("identical outcomes produce degenerate signed-rank rows") {
  ReplayRecord r = hand_record(0.0);
  r.cand_t = {70.0, 70.0};
  r.p3_t = 70.0;
  r.t_min = 70.0;
  const std::vector<ReplayRecord> records(5, r);
  const std::string csv = wilcoxon_csv(records, {10.0});
  const std::vector<std::string> ls = lines(csv);
  REQUIRE(ls.size() >= 2);
  CHECK(ls.front() == "baseline,n,n_nonzero,mean_diff,ci_lo,ci_hi,W,p");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty()) continue;
    CHECK(ends_with(ls[i], ",0,1"));
  }
}

TEST_CASE("replays are deterministic and their records survive JSONL") {
  WorldConfig cfg;
  cfg.depot_ids = {"n0_0", "n3_3"};
  cfg.rho_true = 0.4;
  cfg.noise_sigma = 0.2;
  const TrafficOracle w =
      generate_world(19, generate_network(11, 4, 4), cfg);
  ModelBundle models;
  models.rep = default_representation(8, 1);
  models.radius = default_radius(8, 2);

  const std::vector<Incident> incidents = generate_incidents(w, 8, 5);
  REQUIRE(incidents.size() == 8);
  for (const Incident& inc : incidents) {
    CHECK(inc.time_s >= 0.0);
    CHECK(inc.time_s <= w.cfg.horizon_s);
    CHECK(std::find(w.depots.begin(), w.depots.end(), inc.dest) ==
          w.depots.end());
  }

  const std::vector<ReplayRecord> a = run_replay(w, models, incidents, 5);
  const std::vector<ReplayRecord> b = run_replay(w, models, incidents, 5);
  const std::string ja = records_to_jsonl(a);
  CHECK(ja == records_to_jsonl(b));

  for (const ReplayRecord& r : a) {
    REQUIRE(r.cand_t.size() == w.depots.size());
    CHECK(r.gap_s >= 0.0);
    CHECK(r.rho >= 0.0);
    CHECK(r.t_min == std::min({r.cand_t[0], r.cand_t[1], r.p3_t}));
    CHECK(r.google_depot != r.second_depot);
    // every strategy realizes at least the best candidate
    for (Strategy s : {Strategy::region, Strategy::google_primary,
                       Strategy::google_dual, Strategy::ideal_dual}) {
      CHECK(evaluate_strategy(r, s, 0.0).t >= r.t_min);
    }
    CHECK(evaluate_strategy(r, Strategy::google_dual, 0.0).t <=
          evaluate_strategy(r, Strategy::google_primary, 0.0).t);
  }

  const std::vector<ReplayRecord> back = records_from_jsonl(ja);
  CHECK(records_to_jsonl(back) == ja);
}
