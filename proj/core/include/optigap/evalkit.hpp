#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/dca.hpp"
#include "optigap/nets.hpp"
#include "optigap/simworld.hpp"

namespace optigap {

enum class Strategy {
  region,
  google_primary,
  google_dual,
  google_interval,  // thresholded on pessimistic(selected) - optimistic(other)
  ideal,            // thresholded on the optimistic gap
  ideal_dual,       // always dispatches the secondary
};

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct Incident {
  double time_s = 0.0;
  int dest = -1;
};

std::vector<Incident> generate_incidents(const TrafficOracle& w, int n,
                                         std::uint64_t seed);

// Everything strategy evaluation needs, computed once per incident: all
// candidates share the call time and the oracle. The primary path handed to
// the gap estimator is the selected depot's oracle route, so every
// thresholded strategy dispatches the same primary.
struct ReplayRecord {
  int incident = 0;
  double call_time_s = 0.0;
  int dest = -1;
  std::vector<double> cand_t;       // realized adaptive time per depot
  std::vector<double> predicted;    // oracle predicted duration per depot
  std::vector<double> optimistic;   // per depot, at the call query
  std::vector<double> pessimistic;  // per depot
  int google_depot = 0;             // depot list index, best predicted
  int second_depot = 0;             // depot list index, second best predicted
  int region_depot = 0;             // depot list index from the region map
  double p3_t = 0.0;                // realized hybrid time on the secondary
  double gap_s = 0.0;
  double rho = 0.0;
  double t_min = 0.0;  // min over all candidates including the secondary
};

std::vector<ReplayRecord> run_replay(const TrafficOracle& w,
                                     const ModelBundle& models,
                                     const std::vector<Incident>& incidents,
                                     int prefix_q = 5,
                                     const GapConfig& dca = {});

struct StrategyEval {
  double t = 0.0;      // realized seconds
  int dispatched = 1;  // ambulances sent
};

StrategyEval evaluate_strategy(const ReplayRecord& r, Strategy s, double thr);

// mean of the worst ceil((1 - alpha) * n) values
double cvar(std::vector<double> values, double alpha);

// nearest-rank percentile, p in (0, 1]
double percentile(std::vector<double> values, double p);

struct WilcoxonResult {
  double w = 0.0;  // positive-rank sum
  double p = 1.0;  // one-sided, H1: differences > 0
  int n = 0;
  int n_nonzero = 0;
  double mean_diff = 0.0;
  double ci_lo = 0.0;  // mean +- 1.96 * SE convention
  double ci_hi = 0.0;
};

// zeros discarded, average ranks on ties; exact enumeration when the nonzero
// count is at most 12, tie-corrected normal with continuity correction above
WilcoxonResult wilcoxon_one_sided(const std::vector<double>& diffs);

// the two p-value routes, exposed so they can be compared directly
double wilcoxon_exact_p(const std::vector<double>& diffs);
double wilcoxon_normal_p(const std::vector<double>& diffs);

struct MetricsRow {
  std::string strategy;
  bool has_thr = false;
  double thr = 0.0;
  double a_bar = 0.0;
  double mean = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double cvar95 = 0.0;
  double cvar99 = 0.0;
  double cand_opt_rate = 0.0;
};

// all strategies; the thresholded ones contribute one row per grid point
std::vector<MetricsRow> metrics_table(const std::vector<ReplayRecord>& records,
                                      const std::vector<double>& thr_grid);
std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct SweepRow {
  double thr = 0.0;
  double a_bar = 0.0;
  double mean_regret = 0.0;
  double cvar95 = 0.0;
};

// operating points of the thresholded gap rule across the grid
std::vector<SweepRow> sweep(const std::vector<ReplayRecord>& records,
                            const std::vector<double>& grid);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// regret differences of each baseline against the always-dual gap rule
std::string wilcoxon_csv(const std::vector<ReplayRecord>& records,
                         const std::vector<double>& thr_grid);

std::string records_to_jsonl(const std::vector<ReplayRecord>& records);
std::vector<ReplayRecord> records_from_jsonl(const std::string& text);

}  // namespace optigap
