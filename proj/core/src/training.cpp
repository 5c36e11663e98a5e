#include "optigap/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace optigap {

double step_size(const TrainConfig& cfg, int k) {
  switch (cfg.step) {
    case StepKind::inv_k: return cfg.alpha0 / (1.0 + double(k));
  }
  throw Error("unknown step kind");
}

namespace {

// diverged parameters first surface as non-finite edge costs, which dijkstra
// would misreport as an unreachable destination
bool finite_all(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

double evaluate_loss(const RepresentationModel& m, const RoadNetwork& net,
                     const std::vector<Sample>& samples, LossKind loss,
                     double huber_delta) {
  if (samples.empty()) throw EmptyDataset("no samples to evaluate");
  double total = 0.0;
  for (const Sample& s : samples) {
    const Matrix phi = embed_edges(m, net, s.context);
    const std::vector<double> c = edge_costs(phi);
    if (!finite_all(c))
      throw NonfiniteLoss("non-finite edge costs during evaluation");
    auto [z, pred] = dijkstra(net, c, make_od_indices(net, {s.origin}, s.dest));
    (void)z;
    total += loss_value(loss, huber_delta, pred, s.t_s);
  }
  const double mean = total / double(samples.size());
  if (!std::isfinite(mean)) throw NonfiniteLoss("evaluation loss is not finite");
  return mean;
}

namespace {

void validate_config(const TrainConfig& cfg) {
  if (cfg.batch <= 0 || cfg.iters <= 0 || cfg.alpha0 <= 0.0)
    throw Error("batch, iters, and alpha0 must be positive");
  if (cfg.perturb == PerturbKind::constant && cfg.r0 <= 0.0)
    throw Error("perturbed mode needs r0 > 0");
  if (cfg.holdout < 0.0 || cfg.holdout >= 1.0)
    throw Error("holdout fraction must lie in [0, 1)");
}

}  // namespace

TrainResult train(const RepresentationModel& model, const RoadNetwork& net,
                  const std::vector<Sample>& samples, const TrainConfig& cfg) {
  if (samples.empty()) throw EmptyDataset("no training samples");
  validate_config(cfg);

  Rng root(cfg.seed);
  Rng batch_rng = root.child(seedtag::batches);
  Rng perturb_rng = root.child(seedtag::perturbations);

  // holdout split on a seeded shuffle; training order reshuffles per epoch
  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  batch_rng.shuffle(order);
  const int n_hold = int(std::floor(cfg.holdout * double(samples.size())));
  std::vector<Sample> hold, tr;
  for (std::size_t i = 0; i < order.size(); ++i)
    (int(i) < n_hold ? hold : tr).push_back(samples[std::size_t(order[i])]);
  if (tr.empty()) { tr = std::move(hold); hold.clear(); }

  TrainResult res;
  res.model = model;
  const bool perturbed = cfg.perturb == PerturbKind::constant;
  if (perturbed) {
    res.delta = 2.0 * cfg.r0;
    // P(R = k) proportional to alpha_k; drawn up front so the stream layout
    // is independent of the data
    double total = 0.0;
    for (int k = 0; k < cfg.iters; ++k) total += step_size(cfg, k);
    double u = perturb_rng.uniform() * total;
    res.randomized_index = cfg.iters - 1;
    for (int k = 0; k < cfg.iters; ++k) {
      u -= step_size(cfg, k);
      if (u <= 0.0) { res.randomized_index = k; break; }
    }
  }

  const std::size_t n_par = param_count(res.model);
  std::vector<int> epoch(tr.size());
  for (std::size_t i = 0; i < epoch.size(); ++i) epoch[i] = int(i);
  std::size_t cursor = epoch.size();  // forces a shuffle at iteration 0

  RepresentationModel best = res.model;
  double best_hold = hold.empty() ? 0.0 : evaluate_loss(res.model, net, hold,
                                                        cfg.loss, cfg.huber_delta);
  int bad_evals = 0;
  const std::size_t per_epoch =
      (tr.size() + std::size_t(cfg.batch) - 1) / std::size_t(cfg.batch);

  int k = 0;
  for (; k < cfg.iters; ++k) {
    // next batch, reshuffling at epoch boundaries (without replacement)
    if (cursor >= epoch.size()) {
      batch_rng.shuffle(epoch);
      cursor = 0;
    }
    std::vector<const Sample*> batch;
    for (int b = 0; b < cfg.batch && cursor < epoch.size(); ++b, ++cursor)
      batch.push_back(&tr[std::size_t(epoch[cursor])]);

    // evaluation point: phi or its ball perturbation
    RepresentationModel eval_point = res.model;
    if (perturbed) {
      const std::vector<double> u = perturb_rng.unit_ball(n_par);
      add_flat(eval_point, u, cfg.r0);
    }

    RepGrad acc = zero_grad(eval_point);
    double batch_loss = 0.0;
    for (const Sample* s : batch) {
      const Matrix phi = embed_edges(eval_point, net, s->context);
      const std::vector<double> c = edge_costs(phi);
      if (!finite_all(c))
        throw NonfiniteLoss("training diverged at iteration " +
                            std::to_string(k) +
                            ": non-finite edge costs (reduce alpha0)");
      auto [z, pred] =
          dijkstra(net, c, make_od_indices(net, {s->origin}, s->dest));
      (void)pred;
      PathBackwardResult back =
          backward_through_path(eval_point, net, s->context, z, s->t_s,
                                cfg.loss, cfg.huber_delta, cfg.beta);
      grad_accumulate(acc, back.grad);
      batch_loss += back.loss;
    }
    grad_scale(acc, 1.0 / double(batch.size()));
    batch_loss /= double(batch.size());
    if (!std::isfinite(batch_loss))
      throw NonfiniteLoss("batch loss is not finite");
    res.trace.push_back(batch_loss);

    const double alpha = step_size(cfg, k);
    add_grad(res.model, acc, -alpha);
    if (cfg.weight_decay > 0.0)
      add_flat(res.model, flatten(eval_point), -alpha * cfg.weight_decay);

    if (perturbed && k == res.randomized_index) res.model_r = res.model;

    // holdout check once per epoch pass
    if (!hold.empty() && (std::size_t(k + 1) % per_epoch == 0)) {
      const double h =
          evaluate_loss(res.model, net, hold, cfg.loss, cfg.huber_delta);
      if (h < best_hold) {
        best_hold = h;
        best = res.model;
        bad_evals = 0;
      } else if (++bad_evals >= cfg.patience) {
        ++k;
        break;
      }
    }
  }
  res.iterations_run = k;

  if (!hold.empty()) {
    const double h =
        evaluate_loss(res.model, net, hold, cfg.loss, cfg.huber_delta);
    if (h < best_hold) { best_hold = h; best = res.model; }
    res.model = std::move(best);
    res.holdout_best = best_hold;
  }
  if (perturbed && res.model_r.stat.dims.empty()) res.model_r = res.model;
  return res;
}

FitRadiusResult fit_radius(
    const RadiusModel& model,
    const std::vector<std::pair<std::vector<double>, double>>& pairs,
    int epochs, double lr) {
  if (pairs.empty()) throw EmptyDataset("no radius pairs");
  for (const auto& p : pairs)
    if (p.second < 0.0) throw Error("radius targets must be nonnegative");

  FitRadiusResult res;
  res.model = model;

  auto mae_and_grad = [&](const RadiusModel& m, MlpGrad* g) {
    double total = 0.0;
    for (const auto& [theta, target] : pairs) {
      MlpCache cache;
      const double pred = mlp_forward(m.net, theta, g ? &cache : nullptr)[0];
      const double r = pred - target;
      total += std::fabs(r);
      if (g) {
        const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        mlp_backward(m.net, cache, {sign / double(pairs.size())}, *g);
      }
    }
    return total / double(pairs.size());
  };

  double cur = mae_and_grad(res.model, nullptr);
  res.mae.push_back(cur);
  double step = lr;
  for (int ep = 0; ep < epochs; ++ep) {
    MlpGrad g = zero_grad(res.model.net);
    mae_and_grad(res.model, &g);

    // halving line search keeps accepted losses nonincreasing
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      RadiusModel cand = res.model;
      for (std::size_t l = 0; l < cand.net.w.size(); ++l) {
        for (std::size_t i = 0; i < cand.net.w[l].size(); ++i)
          cand.net.w[l][i] -= step * g.w[l][i];
        for (std::size_t i = 0; i < cand.net.b[l].size(); ++i)
          cand.net.b[l][i] -= step * g.b[l][i];
      }
      const double next = mae_and_grad(cand, nullptr);
      if (next <= cur) {
        res.model = std::move(cand);
        cur = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    res.mae.push_back(cur);
    if (!accepted) break;  // no descent direction at double precision
    step = std::min(step * 1.3, lr);
  }
  return res;
}

std::vector<Sample> samples_from_jsonl(const std::string& text,
                                       const RoadNetwork& net) {
  std::vector<Sample> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    Sample s;
    s.context = j.at("context").get<std::vector<double>>();
    s.origin = net.index_of(j.at("origin").get<std::string>());
    s.dest = net.index_of(j.at("dest").get<std::string>());
    s.t_s = j.at("t_s").get<double>();
    if (s.t_s < 0.0) throw Error("observed time must be nonnegative");
    out.push_back(std::move(s));
  }
  return out;
}

std::string samples_to_jsonl(const std::vector<Sample>& samples,
                             const RoadNetwork& net) {
  std::ostringstream out;
  for (const Sample& s : samples) {
    nlohmann::json j;
    j["context"] = s.context;
    j["origin"] = net.nodes[std::size_t(s.origin)].id;
    j["dest"] = net.nodes[std::size_t(s.dest)].id;
    j["t_s"] = s.t_s;
    out << j.dump() << "\n";
  }
  return out.str();
}

std::vector<Sample> load_samples(const std::string& path,
                                 const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return samples_from_jsonl(buf.str(), net);
}

void save_samples(const std::vector<Sample>& samples, const RoadNetwork& net,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << samples_to_jsonl(samples, net);
}

}  // namespace optigap
