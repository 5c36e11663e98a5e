#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "doctest.h"
#include "optigap/nets.hpp"
#include "optigap/training.hpp"
#include "test_util.hpp"

using namespace optigap;
using namespace testutil;

namespace {

std::vector<double> ctx_const(double v) {
  return std::vector<double>(std::size_t(kContextDim), v);
}

TrainConfig quiet_config() {
  TrainConfig cfg;
  cfg.batch = 1;
  cfg.iters = 1;
  cfg.alpha0 = 0.01;
  cfg.beta = 0.0;
  cfg.weight_decay = 0.0;
  cfg.holdout = 0.0;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("a sample already predicted exactly produces a zero update") {
  const RoadNetwork net = diamond();
  const RepresentationModel m = default_representation(4, 9);
  const std::vector<double> ctx = ctx_const(0.2);
  const Matrix phi = embed_edges(m, net, ctx);
  const auto [z, pred] = dijkstra(net, edge_costs(phi), make_od(net, {"a"}, "d"));

  Sample s;
  s.context = ctx;
  s.origin = net.index_of("a");
  s.dest = net.index_of("d");
  s.t_s = pred;

  const TrainResult r = train(m, net, {s}, quiet_config());
  CHECK(flatten(r.model) == flatten(m));
}

TEST_CASE("identical seeds give bit-identical training trajectories") {
  Rng rng(51);
  const RoadNetwork net = random_dag(8, 6, rng);
  const RepresentationModel m = default_representation(4, 52);

  std::vector<Sample> samples;
  for (int i = 0; i < 20; ++i) {
    Sample s;
    s.context = ctx_const(rng.uniform(0.0, 1.0));
    s.origin = net.index_of("v0");
    s.dest = net.index_of("v7");
    s.t_s = rng.uniform(5.0, 40.0);
    samples.push_back(std::move(s));
  }

  TrainConfig cfg;
  cfg.batch = 4;
  cfg.iters = 10;
  cfg.alpha0 = 0.002;
  cfg.holdout = 0.1;
  cfg.seed = 77;

  const TrainResult a = train(m, net, samples, cfg);
  const TrainResult b = train(m, net, samples, cfg);
  CHECK(flatten(a.model) == flatten(b.model));
  CHECK(a.trace == b.trace);
  CHECK(a.iterations_run == b.iterations_run);
}

TEST_CASE("ties freeze the gradient of the path the total order selects") {
  // identical features embed identically, so the two parallel edges tie and
  // the smaller id wins; the descent step must use exactly that path
  std::vector<EdgeSpec> es = {edge(2, "a", "b"), edge(5, "a", "b")};
  es[1].features = es[0].features;
  const RoadNetwork net = build_network(nodes({"a", "b"}), es);
  const RepresentationModel m = default_representation(3, 53);
  const std::vector<double> ctx = ctx_const(0.45);

  const Matrix phi = embed_edges(m, net, ctx);
  const auto [z, pred] = dijkstra(net, edge_costs(phi), make_od(net, {"a"}, "b"));
  REQUIRE(net.edges[std::size_t(z.edge_seq.front())].id == 2);

  Sample s;
  s.context = ctx;
  s.origin = net.index_of("a");
  s.dest = net.index_of("b");
  s.t_s = pred + 4.0;

  const TrainConfig cfg = quiet_config();
  const TrainResult r = train(m, net, {s}, cfg);

  const PathBackwardResult bw = backward_through_path(
      m, net, ctx, z, s.t_s, cfg.loss, cfg.huber_delta, cfg.beta);
  const std::vector<double> before = flatten(m);
  const std::vector<double> after = flatten(r.model);
  const std::vector<double> g = flatten_grad(m, bw.grad);
  REQUIRE(after.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(after[i] == before[i] - cfg.alpha0 * g[i]);
  }
}

TEST_CASE("the step schedule decays fast enough for the log-weighted tail") {
  TrainConfig cfg;
  int violations = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 1000000; ++k) {
    const double a = step_size(cfg, k) * std::log(double(k) + 2.0);
    if (a > prev) ++violations;
    prev = a;
  }
  CHECK(violations == 0);
  CHECK(step_size(cfg, 0) == cfg.alpha0);
  CHECK(step_size(cfg, 9) == doctest::Approx(cfg.alpha0 / 10.0).epsilon(1e-15));
}

TEST_CASE("perturbed mode reports the stationarity scale and a valid index") {
  Rng rng(55);
  const RoadNetwork net = random_dag(6, 4, rng);
  const RepresentationModel m = default_representation(3, 56);

  std::vector<Sample> samples;
  for (int i = 0; i < 8; ++i) {
    Sample s;
    s.context = ctx_const(rng.uniform(0.0, 1.0));
    s.origin = net.index_of("v0");
    s.dest = net.index_of("v5");
    s.t_s = rng.uniform(5.0, 30.0);
    samples.push_back(std::move(s));
  }

  TrainConfig cfg;
  cfg.batch = 4;
  cfg.iters = 12;
  cfg.alpha0 = 0.002;
  cfg.holdout = 0.0;
  cfg.perturb = PerturbKind::constant;
  cfg.r0 = 0.05;
  cfg.seed = 60;

  const TrainResult r = train(m, net, samples, cfg);
  CHECK(r.delta == 0.1);
  CHECK(r.randomized_index >= 0);
  CHECK(r.randomized_index < r.iterations_run);
  for (double v : flatten(r.model_r)) CHECK(std::isfinite(v));
}

TEST_CASE("divergence surfaces as a loss error, not a confusing graph error") {
  const RoadNetwork net = diamond();
  const RepresentationModel m = default_representation(4, 61);
  Sample s;
  s.context = ctx_const(0.5);
  s.origin = net.index_of("a");
  s.dest = net.index_of("d");
  s.t_s = 1e6;

  TrainConfig cfg = quiet_config();
  cfg.iters = 40;
  cfg.alpha0 = 1e6;
  CHECK_THROWS_AS(train(m, net, {s}, cfg), NonfiniteLoss);
}

TEST_CASE("radius fitting drives all-zero targets below 0.05") {
  Rng rng(63);
  std::vector<std::pair<std::vector<double>, double>> pairs;
  for (int i = 0; i < 30; ++i) {
    std::vector<double> theta(8);
    for (double& v : theta) v = rng.uniform(-1.0, 1.0);
    pairs.emplace_back(std::move(theta), 0.0);
  }
  const FitRadiusResult r = fit_radius(default_radius(8, 64), pairs, 150, 0.05);
  for (const auto& [theta, target] : pairs) {
    CHECK(radius_predict(r.model, theta) < 0.05);
  }
}

TEST_CASE("radius fitting recovers a smooth generative target") {
  Rng rng(65);
  std::vector<double> w(8);
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  auto target = [&](const std::vector<double>& theta) {
    return 0.2 + 0.3 / (1.0 + std::exp(-dot(w, theta)));
  };
  auto draw = [&](int n) {
    std::vector<std::pair<std::vector<double>, double>> ps;
    for (int i = 0; i < n; ++i) {
      std::vector<double> theta(8);
      for (double& v : theta) v = rng.uniform(-1.0, 1.0);
      const double t = target(theta);
      ps.emplace_back(std::move(theta), t);
    }
    return ps;
  };
  const auto train_pairs = draw(120);
  const auto test_pairs = draw(40);
  const FitRadiusResult r = fit_radius(default_radius(8, 66), train_pairs, 300, 0.05);
  double mae = 0.0;
  for (const auto& [theta, t] : test_pairs) {
    mae += std::fabs(radius_predict(r.model, theta) - t);
  }
  mae /= double(test_pairs.size());
  CHECK(mae <= 0.1);
}

TEST_CASE("radius fitting memorizes a single pair") {
  std::vector<std::pair<std::vector<double>, double>> pairs;
  pairs.emplace_back(std::vector<double>(8, 0.4), 0.7);
  const FitRadiusResult r = fit_radius(default_radius(8, 67), pairs, 400, 0.05);
  CHECK(std::fabs(radius_predict(r.model, pairs[0].first) - 0.7) <= 0.01);
}

TEST_CASE("accepted radius-fit losses never increase") {
  Rng rng(69);
  std::vector<std::pair<std::vector<double>, double>> pairs;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> theta(8);
    for (double& v : theta) v = rng.uniform(-1.0, 1.0);
    pairs.emplace_back(std::move(theta), rng.uniform(0.0, 0.8));
  }
  const FitRadiusResult r = fit_radius(default_radius(8, 70), pairs, 100, 0.05);
  for (std::size_t i = 0; i + 1 < r.mae.size(); ++i) {
    CHECK(r.mae[i + 1] <= r.mae[i] + 1e-12);
  }
  CHECK_THROWS_AS(fit_radius(default_radius(8, 71), {}, 10, 0.05), EmptyDataset);
}

TEST_CASE("sample jsonl round trip preserves every field") {
  Rng rng(73);
  const RoadNetwork net = random_dag(6, 4, rng);
  std::vector<Sample> samples;
  for (int i = 0; i < 5; ++i) {
    Sample s;
    s.context = ctx_const(rng.uniform(0.0, 1.0));
    s.origin = net.index_of("v1");
    s.dest = net.index_of("v5");
    s.t_s = rng.uniform(1.0, 100.0);
    samples.push_back(std::move(s));
  }
  const std::string text = samples_to_jsonl(samples, net);
  const std::vector<Sample> back = samples_from_jsonl(text, net);
  REQUIRE(back.size() == samples.size());
  CHECK(samples_to_jsonl(back, net) == text);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].context == samples[i].context);
    CHECK(back[i].origin == samples[i].origin);
    CHECK(back[i].dest == samples[i].dest);
    CHECK(back[i].t_s == samples[i].t_s);
  }
}
