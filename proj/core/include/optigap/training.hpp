#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"
#include "optigap/nets.hpp"

namespace optigap {

enum class StepKind { inv_k };             // alpha_k = alpha0 / (1 + k)
enum class PerturbKind { none, constant }; // r_k = 0 | r0

struct TrainConfig {
  int batch = 32;
  int iters = 200;  // mini-batch steps, not epochs
  StepKind step = StepKind::inv_k;
  double alpha0 = 0.05;
  PerturbKind perturb = PerturbKind::none;
  double r0 = 0.0;  // perturbation radius; > 0 required in perturbed mode
  LossKind loss = LossKind::squared;
  double huber_delta = 30.0;
  double beta = 0.0;  // graph-regularizer weight
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  double holdout = 0.1;  // fraction held out for early stopping
  int patience = 20;     // holdout evaluations without improvement
};

// origin/dest are node indices; context has the full context dimension
struct Sample {
  std::vector<double> context;
  int origin = -1;
  int dest = -1;
  double t_s = 0.0;
};

struct TrainResult {
  RepresentationModel model;  // final iterate (best-holdout when early stop hit)
  std::vector<double> trace;  // mean batch loss per iteration, at the eval point
  int randomized_index = -1;          // R with P(R=k) proportional to alpha_k
  RepresentationModel model_r;        // iterate at R (perturbed mode only)
  double delta = 0.0;                 // stationarity scale 2*r0 (perturbed mode)
  int iterations_run = 0;             // < iters when early stopping fires
  double holdout_best = 0.0;
};

double step_size(const TrainConfig& cfg, int k);

// mean l(prediction, t) over samples under fresh shortest paths; no
// regularizer term
double evaluate_loss(const RepresentationModel& m, const RoadNetwork& net,
                     const std::vector<Sample>& samples, LossKind loss,
                     double huber_delta);

// Mini-batch conservative gradient descent. Each iteration freezes the
// shortest path per sample (tie-break makes the selection deterministic),
// backpropagates through the frozen path, averages over the batch, adds
// weight decay, and steps. In perturbed mode gradients are taken at
// phi + r_k u_k with u_k uniform in the unit ball of the flattened
// parameter space, while the update applies to phi itself.
TrainResult train(const RepresentationModel& model, const RoadNetwork& net,
                  const std::vector<Sample>& samples, const TrainConfig& cfg);

struct FitRadiusResult {
  RadiusModel model;
  std::vector<double> mae;  // epoch-mean absolute error, accepted steps only
};

// Full-batch descent on mean absolute error; a halving line search keeps the
// accepted-loss sequence nonincreasing.
FitRadiusResult fit_radius(const RadiusModel& model,
                           const std::vector<std::pair<std::vector<double>, double>>& pairs,
                           int epochs, double lr);

// samples.jsonl: one {"context":[...],"origin":str,"dest":str,"t_s":f} per line
std::vector<Sample> samples_from_jsonl(const std::string& text,
                                       const RoadNetwork& net);
std::string samples_to_jsonl(const std::vector<Sample>& samples,
                             const RoadNetwork& net);
std::vector<Sample> load_samples(const std::string& path, const RoadNetwork& net);
void save_samples(const std::vector<Sample>& samples, const RoadNetwork& net,
                  const std::string& path);

}  // namespace optigap
