#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optigap/common.hpp"
#include "optigap/netgraph.hpp"

namespace optigap {

inline constexpr int kContextDim = 27;

enum class Activation { swish, softplus, tanh_fn, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Plain fully-connected stack. w[l] is row-major [dims[l+1] x dims[l]].
struct MlpParams {
  std::vector<int> dims;
  std::vector<Activation> acts;
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  int layer_count() const { return int(acts.size()); }
  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
};

struct MlpGrad {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
};

struct MlpCache {
  std::vector<std::vector<double>> x;  // x[0] = input, x[l+1] = layer l output
  std::vector<std::vector<double>> z;  // preactivations
};

void validate_mlp(const MlpParams& p);
MlpParams make_mlp(const std::vector<int>& dims,
                   const std::vector<Activation>& acts, Rng& rng);

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& in,
                                MlpCache* cache = nullptr);
MlpGrad zero_grad(const MlpParams& p);
// Accumulates parameter gradients into `g` and returns dL/dinput.
std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                 const std::vector<double>& dout, MlpGrad& g);

// phi(T)[e] = cross(stat(features[e]), ctx(T)); all three share output dim d.
struct RepresentationModel {
  int d = 8;
  MlpParams stat;   // edge features -> R^d
  MlpParams ctx;    // context -> R^d
  MlpParams cross;  // concat(R^d, R^d) -> R^d
};

// nonnegative radius head: softplus-terminated map R^d -> R
struct RadiusModel {
  MlpParams net;
};

struct RepGrad {
  MlpGrad stat, ctx, cross;
};

void validate_model(const RepresentationModel& m);
RepresentationModel default_representation(int d, std::uint64_t seed);
RadiusModel default_radius(int d, std::uint64_t seed);

std::vector<double> context_embedding(const RepresentationModel& m,
                                      const std::vector<double>& context);
// row e = stat(features[e])
Matrix static_embeddings(const RepresentationModel& m, const RoadNetwork& net);
// row e = phi(T)[e]
Matrix embed_edges(const RepresentationModel& m, const RoadNetwork& net,
                   const std::vector<double>& context);
// c[e] = squared Euclidean norm of row e; nonnegative by construction
std::vector<double> edge_costs(const Matrix& phi);

// sum over unordered adjacent edge pairs of the squared distance between
// length-normalized static embeddings
struct RegularizerResult {
  double value = 0.0;
  MlpGrad stat_grad;  // d(value)/d(static-net params); ctx/cross parts are zero
};
RegularizerResult regularizer(const RepresentationModel& m, const RoadNetwork& net);

enum class LossKind { squared, huber };

// l(y,t): squared = (y-t)^2; huber = r^2/2 inside |r| <= delta, linear outside
double loss_value(LossKind kind, double delta, double y, double t);
double loss_derivative(LossKind kind, double delta, double y, double t);

// Exact reverse-mode gradient of l(c(phi) . z, t_obs) + beta * R(theta_static)
// with the path z frozen. The regularizer contributes only to the static-net
// block.
struct PathBackwardResult {
  RepGrad grad;
  double prediction = 0.0;  // c . z
  double loss = 0.0;        // l + beta * R
};
PathBackwardResult backward_through_path(const RepresentationModel& m,
                                         const RoadNetwork& net,
                                         const std::vector<double>& context,
                                         const PathVec& z, double t_obs,
                                         LossKind loss, double huber_delta,
                                         double beta);

double radius_predict(const RadiusModel& m, const std::vector<double>& theta_ctx);

// flat parameter-vector order: stat, ctx, cross; per net: layer 0 weights,
// layer 0 biases, layer 1 weights, ...
std::size_t param_count(const MlpParams& p);
std::size_t param_count(const RepresentationModel& m);
std::vector<double> flatten(const RepresentationModel& m);
std::vector<double> flatten_grad(const RepresentationModel& m, const RepGrad& g);
void add_flat(RepresentationModel& m, const std::vector<double>& dir, double scale);
void add_grad(RepresentationModel& m, const RepGrad& g, double scale);

void grad_accumulate(RepGrad& into, const RepGrad& from);
void grad_scale(RepGrad& g, double s);
RepGrad zero_grad(const RepresentationModel& m);

// model.json: version, d, seeds, dims/activations, row-major weights, biases.
// Round trip is bit exact.
struct ModelBundle {
  RepresentationModel rep;
  std::optional<RadiusModel> radius;
  std::uint64_t init_seed = 0;
};
std::string model_to_json(const ModelBundle& m);
ModelBundle model_from_json(const std::string& text);
ModelBundle load_model(const std::string& path);
void save_model(const ModelBundle& m, const std::string& path);

}  // namespace optigap
