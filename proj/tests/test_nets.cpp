#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "optigap/nets.hpp"
#include "optigap/reference.hpp"
#include "test_util.hpp"

using namespace optigap;
using namespace testutil;

namespace {

void zero_params(MlpParams& p) {
  for (auto& w : p.w) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : p.b) std::fill(b.begin(), b.end(), 0.0);
}

RepresentationModel zeroed_model(int d) {
  RepresentationModel m = default_representation(d, 1);
  zero_params(m.stat);
  zero_params(m.ctx);
  zero_params(m.cross);
  return m;
}

std::vector<double> ctx_const(double v) {
  return std::vector<double>(std::size_t(kContextDim), v);
}

double rel_l2_err(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num) / std::max(1e-30, std::sqrt(den));
}

}  // namespace

TEST_CASE("an all-zero model embeds every edge to the zero vector") {
  const RoadNetwork net = diamond();
  const Matrix phi = embed_edges(zeroed_model(6), net, ctx_const(0.4));
  REQUIRE(phi.rows == net.edge_count());
  REQUIRE(phi.cols == 6);
  for (double v : phi.v) CHECK(v == 0.0);
}

TEST_CASE("embedding the same context twice is bit identical") {
  Rng rng(41);
  const RoadNetwork net = random_dag(10, 8, rng);
  const RepresentationModel m = default_representation(8, 42);
  const std::vector<double> ctx = ctx_const(0.7);
  CHECK(embed_edges(m, net, ctx) == embed_edges(m, net, ctx));
}

TEST_CASE("embeddings have the advertised shape and stay finite") {
  Rng rng(43);
  const RoadNetwork net = random_dag(20, 21, rng);  // 40 edges
  REQUIRE(net.edge_count() == 40);
  const Matrix phi = embed_edges(default_representation(8, 7), net, ctx_const(0.1));
  CHECK(phi.rows == 40);
  CHECK(phi.cols == 8);
  for (double v : phi.v) CHECK(std::isfinite(v));
}

TEST_CASE("edge embedding rejects a context of the wrong dimension") {
  const RoadNetwork net = line3();
  const RepresentationModel m = default_representation(4, 2);
  CHECK_THROWS_AS(embed_edges(m, net, std::vector<double>(5, 0.0)), DimMismatch);
}

TEST_CASE("edge costs are squared row norms") {
  Matrix phi(3, 2);
  phi(0, 0) = 0.0;
  phi(0, 1) = 0.0;
  phi(1, 0) = 3.0;
  phi(1, 1) = 4.0;
  phi(2, 0) = -1.5;
  phi(2, 1) = 0.5;
  const std::vector<double> c = edge_costs(phi);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 25.0);
  for (double v : c) CHECK(v >= 0.0);
}

TEST_CASE("identical adjacent edges contribute nothing to the regularizer") {
  // same features and lengths give identical normalized static embeddings
  std::vector<EdgeSpec> es = {edge(1, "a", "b"), edge(2, "b", "c")};
  es[1].features = es[0].features;
  es[1].length_m = es[0].length_m;
  const RoadNetwork net = build_network(nodes({"a", "b", "c"}), es);
  const RegularizerResult r = regularizer(default_representation(5, 11), net);
  CHECK(r.value == 0.0);
}

TEST_CASE("a network without adjacent edge pairs has zero regularizer") {
  const RoadNetwork net = build_network(nodes({"a", "b", "c", "d"}),
                                        {edge(1, "a", "b"), edge(2, "c", "d")});
  REQUIRE(net.adjacent_pairs.empty());
  const RepresentationModel m = default_representation(4, 13);
  const RegularizerResult r = regularizer(m, net);
  CHECK(r.value == 0.0);
  RepGrad g = zero_grad(m);
  g.stat = r.stat_grad;
  for (double v : flatten_grad(m, g)) CHECK(v == 0.0);
}

TEST_CASE("regularizer gradient matches central finite differences") {
  const RoadNetwork net = diamond();
  const RepresentationModel m = default_representation(3, 17);
  const RegularizerResult r = regularizer(m, net);
  RepGrad g = zero_grad(m);
  g.stat = r.stat_grad;
  const std::vector<double> got = flatten_grad(m, g);
  const std::vector<double> want = fd_gradient_regularizer(m, net, 1e-5);
  CHECK(rel_l2_err(got, want) <= 1e-5);
}

TEST_CASE("an exact prediction leaves only the regularizer gradient") {
  const RoadNetwork net = diamond();
  const RepresentationModel m = default_representation(4, 19);
  const std::vector<double> ctx = ctx_const(0.25);
  const Matrix phi = embed_edges(m, net, ctx);
  const auto [z, pred] = dijkstra(net, edge_costs(phi), make_od(net, {"a"}, "d"));

  const double beta = 0.25;
  const PathBackwardResult bw = backward_through_path(
      m, net, ctx, z, pred, LossKind::squared, 30.0, beta);
  const RegularizerResult reg = regularizer(m, net);
  RepGrad rg = zero_grad(m);
  rg.stat = reg.stat_grad;

  CHECK(bw.prediction == pred);
  CHECK(bw.loss == doctest::Approx(beta * reg.value).epsilon(1e-12));
  const std::vector<double> got = flatten_grad(m, bw.grad);
  std::vector<double> want = flatten_grad(m, rg);
  for (double& v : want) v *= beta;
  CHECK(rel_l2_err(got, want) <= 1e-12);
}

TEST_CASE("frozen-path gradients match central finite differences") {
  const RoadNetwork net = diamond();
  const RepresentationModel m = default_representation(3, 23);
  const std::vector<double> ctx = ctx_const(0.6);
  const Matrix phi = embed_edges(m, net, ctx);
  const auto [z, pred] = dijkstra(net, edge_costs(phi), make_od(net, {"a"}, "d"));
  const double t_obs = pred + 0.8;  // off-target so the loss term is active

  const PathBackwardResult bw = backward_through_path(
      m, net, ctx, z, t_obs, LossKind::squared, 30.0, 0.0);
  const std::vector<double> got = flatten_grad(m, bw.grad);
  const std::vector<double> want = fd_gradient_path(
      m, net, ctx, z, t_obs, LossKind::squared, 30.0, 0.0, 1e-5);
  CHECK(rel_l2_err(got, want) <= 1e-4);
}

TEST_CASE("huber inside its quadratic zone is half the squared-loss gradient") {
  const RoadNetwork net = diamond();
  const RepresentationModel m = default_representation(4, 29);
  const std::vector<double> ctx = ctx_const(0.35);
  const Matrix phi = embed_edges(m, net, ctx);
  const auto [z, pred] = dijkstra(net, edge_costs(phi), make_od(net, {"a"}, "d"));
  const double t_obs = pred - 1.0;  // residual 1, well inside delta = 30

  const std::vector<double> gh = flatten_grad(
      m, backward_through_path(m, net, ctx, z, t_obs, LossKind::huber, 30.0, 0.0).grad);
  std::vector<double> gs = flatten_grad(
      m, backward_through_path(m, net, ctx, z, t_obs, LossKind::squared, 30.0, 0.0).grad);
  for (double& v : gs) v *= 0.5;
  CHECK(rel_l2_err(gh, gs) <= 1e-12);
}

TEST_CASE("loss heads agree with their closed forms") {
  CHECK(loss_value(LossKind::squared, 30.0, 7.0, 4.0) == 9.0);
  CHECK(loss_derivative(LossKind::squared, 30.0, 7.0, 4.0) == 6.0);
  CHECK(loss_value(LossKind::huber, 2.0, 1.0, 0.0) == 0.5);          // quadratic zone
  CHECK(loss_value(LossKind::huber, 2.0, 5.0, 0.0) == 2.0 * (5.0 - 1.0));  // linear zone
  CHECK(loss_derivative(LossKind::huber, 2.0, 5.0, 0.0) == 2.0);     // clamped
  CHECK(loss_derivative(LossKind::huber, 2.0, -5.0, 0.0) == -2.0);
}

TEST_CASE("a zero-weight radius head predicts softplus of zero") {
  RadiusModel r = default_radius(8, 31);
  for (auto& w : r.net.w) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : r.net.b) std::fill(b.begin(), b.end(), 0.0);
  const double p = radius_predict(r, std::vector<double>(8, 1.3));
  CHECK(p == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("radius predictions are never negative") {
  Rng rng(37);
  const RadiusModel r = default_radius(8, 37);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> in(8);
    for (double& v : in) v = rng.uniform(-3.0, 3.0);
    CHECK(radius_predict(r, in) >= 0.0);
  }
}

TEST_CASE("model json round trip is byte identical") {
  ModelBundle b;
  b.rep = default_representation(8, 47);
  b.radius = default_radius(8, 48);
  b.init_seed = 47;
  const std::string j1 = model_to_json(b);
  const ModelBundle back = model_from_json(j1);
  CHECK(model_to_json(back) == j1);
  CHECK(flatten(back.rep) == flatten(b.rep));
  REQUIRE(back.radius.has_value());
  CHECK(back.radius->net.w == b.radius->net.w);
  CHECK(back.radius->net.b == b.radius->net.b);
}
