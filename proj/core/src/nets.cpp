#include "optigap/nets.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace optigap {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double act_eval(Activation a, double x) {
  switch (a) {
    case Activation::swish: return x * sigmoid(x);
    case Activation::softplus:
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case Activation::tanh_fn: return std::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

double act_deriv(Activation a, double x) {
  switch (a) {
    case Activation::swish: {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::softplus: return sigmoid(x);
    case Activation::tanh_fn: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::swish: return "swish";
    case Activation::softplus: return "softplus";
    case Activation::tanh_fn: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "swish") return Activation::swish;
  if (name == "softplus") return Activation::softplus;
  if (name == "tanh") return Activation::tanh_fn;
  if (name == "identity") return Activation::identity;
  throw Error("unknown activation: " + name);
}

void validate_mlp(const MlpParams& p) {
  if (p.dims.size() < 2 || p.acts.size() + 1 != p.dims.size())
    throw DimMismatch("mlp layer chain is inconsistent");
  if (p.w.size() != p.acts.size() || p.b.size() != p.acts.size())
    throw DimMismatch("mlp parameter arrays do not match layer count");
  for (int l = 0; l < p.layer_count(); ++l) {
    if (p.dims[l] <= 0 || p.dims[l + 1] <= 0)
      throw DimMismatch("mlp layer with nonpositive width");
    if (int(p.w[l].size()) != p.dims[l] * p.dims[l + 1])
      throw DimMismatch("mlp weight block size mismatch at layer " +
                        std::to_string(l));
    if (int(p.b[l].size()) != p.dims[l + 1])
      throw DimMismatch("mlp bias size mismatch at layer " + std::to_string(l));
  }
}

MlpParams make_mlp(const std::vector<int>& dims,
                   const std::vector<Activation>& acts, Rng& rng) {
  MlpParams p;
  p.dims = dims;
  p.acts = acts;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    std::vector<double> w(std::size_t(fan_in) * fan_out);
    for (double& x : w) x = rng.uniform(-bound, bound);
    p.w.push_back(std::move(w));
    p.b.emplace_back(fan_out, 0.0);
  }
  validate_mlp(p);
  return p;
}

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& in,
                                MlpCache* cache) {
  if (int(in.size()) != p.in_dim())
    throw DimMismatch("mlp input size " + std::to_string(in.size()) +
                      ", expected " + std::to_string(p.in_dim()));
  std::vector<double> x = in;
  if (cache) {
    cache->x.clear();
    cache->z.clear();
    cache->x.push_back(x);
  }
  for (int l = 0; l < p.layer_count(); ++l) {
    const int n_in = p.dims[l], n_out = p.dims[l + 1];
    std::vector<double> z(n_out);
    for (int i = 0; i < n_out; ++i) {
      double s = p.b[l][i];
      const double* row = &p.w[l][std::size_t(i) * n_in];
      for (int j = 0; j < n_in; ++j) s += row[j] * x[j];
      z[i] = s;
    }
    std::vector<double> y(n_out);
    for (int i = 0; i < n_out; ++i) y[i] = act_eval(p.acts[l], z[i]);
    if (cache) {
      cache->z.push_back(z);
      cache->x.push_back(y);
    }
    x = std::move(y);
  }
  return x;
}

MlpGrad zero_grad(const MlpParams& p) {
  MlpGrad g;
  for (int l = 0; l < p.layer_count(); ++l) {
    g.w.emplace_back(p.w[l].size(), 0.0);
    g.b.emplace_back(p.b[l].size(), 0.0);
  }
  return g;
}

std::vector<double> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                 const std::vector<double>& dout, MlpGrad& g) {
  std::vector<double> dy = dout;
  for (int l = p.layer_count() - 1; l >= 0; --l) {
    const int n_in = p.dims[l], n_out = p.dims[l + 1];
    std::vector<double> dz(n_out);
    for (int i = 0; i < n_out; ++i)
      dz[i] = dy[i] * act_deriv(p.acts[l], cache.z[l][i]);
    const std::vector<double>& x = cache.x[l];
    for (int i = 0; i < n_out; ++i) {
      double* grow = &g.w[l][std::size_t(i) * n_in];
      for (int j = 0; j < n_in; ++j) grow[j] += dz[i] * x[j];
      g.b[l][i] += dz[i];
    }
    std::vector<double> dx(n_in, 0.0);
    for (int i = 0; i < n_out; ++i) {
      const double* row = &p.w[l][std::size_t(i) * n_in];
      for (int j = 0; j < n_in; ++j) dx[j] += row[j] * dz[i];
    }
    dy = std::move(dx);
  }
  return dy;
}

void validate_model(const RepresentationModel& m) {
  validate_mlp(m.stat);
  validate_mlp(m.ctx);
  validate_mlp(m.cross);
  if (m.stat.out_dim() != m.d || m.ctx.out_dim() != m.d ||
      m.cross.out_dim() != m.d)
    throw DimMismatch("representation nets must share the output dimension d");
  if (m.cross.in_dim() != 2 * m.d)
    throw DimMismatch("cross net input must be the concatenated pair (2d)");
}

RepresentationModel default_representation(int d, std::uint64_t seed) {
  Rng rng(seed);
  RepresentationModel m;
  m.d = d;
  m.stat = make_mlp({kEdgeFeatureDim, 32, d},
                    {Activation::swish, Activation::swish}, rng);
  m.ctx = make_mlp({kContextDim, 32, d},
                   {Activation::swish, Activation::swish}, rng);
  m.cross = make_mlp({2 * d, 32, d},
                     {Activation::swish, Activation::identity}, rng);
  validate_model(m);
  return m;
}

RadiusModel default_radius(int d, std::uint64_t seed) {
  Rng rng(seed);
  RadiusModel m;
  m.net = make_mlp({d, 16, 1}, {Activation::swish, Activation::softplus}, rng);
  return m;
}

std::vector<double> context_embedding(const RepresentationModel& m,
                                      const std::vector<double>& context) {
  return mlp_forward(m.ctx, context);
}

Matrix static_embeddings(const RepresentationModel& m, const RoadNetwork& net) {
  Matrix th(net.edge_count(), m.stat.out_dim());
  for (int e = 0; e < net.edge_count(); ++e) {
    const std::vector<double> out = mlp_forward(m.stat, net.edges[e].features);
    for (int k = 0; k < th.cols; ++k) th(e, k) = out[k];
  }
  return th;
}

Matrix embed_edges(const RepresentationModel& m, const RoadNetwork& net,
                   const std::vector<double>& context) {
  const std::vector<double> theta = mlp_forward(m.ctx, context);
  Matrix phi(net.edge_count(), m.d);
  std::vector<double> concat(2 * m.d);
  for (int e = 0; e < net.edge_count(); ++e) {
    const std::vector<double> th = mlp_forward(m.stat, net.edges[e].features);
    for (int k = 0; k < m.d; ++k) concat[k] = th[k];
    for (int k = 0; k < m.d; ++k) concat[m.d + k] = theta[k];
    const std::vector<double> out = mlp_forward(m.cross, concat);
    for (int k = 0; k < m.d; ++k) phi(e, k) = out[k];
  }
  return phi;
}

std::vector<double> edge_costs(const Matrix& phi) {
  std::vector<double> c(phi.rows, 0.0);
  for (int e = 0; e < phi.rows; ++e) {
    double s = 0.0;
    for (int k = 0; k < phi.cols; ++k) s += phi(e, k) * phi(e, k);
    c[e] = s;
  }
  return c;
}

namespace {

// per-edge cotangents of the adjacency regularizer w.r.t. the static
// embeddings; `theta` rows are the unnormalized embeddings
double regularizer_cotangents(const RoadNetwork& net, const Matrix& theta,
                              std::vector<std::vector<double>>& dtheta) {
  const int dd = theta.cols;
  dtheta.assign(net.edge_count(), std::vector<double>(dd, 0.0));
  double value = 0.0;
  for (const auto& [e1, e2] : net.adjacent_pairs) {
    const double s1 = 1.0 / std::sqrt(net.edges[e1].length_m);
    const double s2 = 1.0 / std::sqrt(net.edges[e2].length_m);
    for (int k = 0; k < dd; ++k) {
      const double diff = theta(e1, k) * s1 - theta(e2, k) * s2;
      value += diff * diff;
      dtheta[e1][k] += 2.0 * diff * s1;
      dtheta[e2][k] -= 2.0 * diff * s2;
    }
  }
  return value;
}

}  // namespace

RegularizerResult regularizer(const RepresentationModel& m,
                              const RoadNetwork& net) {
  const int dd = m.stat.out_dim();
  std::vector<MlpCache> caches(net.edge_count());
  Matrix theta(net.edge_count(), dd);
  for (int e = 0; e < net.edge_count(); ++e) {
    const std::vector<double> out =
        mlp_forward(m.stat, net.edges[e].features, &caches[e]);
    for (int k = 0; k < dd; ++k) theta(e, k) = out[k];
  }
  std::vector<std::vector<double>> dtheta;
  RegularizerResult res;
  res.value = regularizer_cotangents(net, theta, dtheta);
  res.stat_grad = zero_grad(m.stat);
  for (int e = 0; e < net.edge_count(); ++e)
    mlp_backward(m.stat, caches[e], dtheta[e], res.stat_grad);
  return res;
}

double loss_value(LossKind kind, double delta, double y, double t) {
  const double r = y - t;
  if (kind == LossKind::squared) return r * r;
  const double a = std::fabs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double loss_derivative(LossKind kind, double delta, double y, double t) {
  const double r = y - t;
  if (kind == LossKind::squared) return 2.0 * r;
  if (r > delta) return delta;
  if (r < -delta) return -delta;
  return r;
}

PathBackwardResult backward_through_path(const RepresentationModel& m,
                                         const RoadNetwork& net,
                                         const std::vector<double>& context,
                                         const PathVec& z, double t_obs,
                                         LossKind loss, double huber_delta,
                                         double beta) {
  validate_model(m);
  const int dd = m.d;

  MlpCache ctx_cache;
  const std::vector<double> theta_ctx = mlp_forward(m.ctx, context, &ctx_cache);

  std::vector<MlpCache> stat_caches(net.edge_count());
  Matrix theta(net.edge_count(), dd);
  for (int e = 0; e < net.edge_count(); ++e) {
    const std::vector<double> out =
        mlp_forward(m.stat, net.edges[e].features, &stat_caches[e]);
    for (int k = 0; k < dd; ++k) theta(e, k) = out[k];
  }

  // forward through the cross net on path edges only
  std::vector<MlpCache> cross_caches(z.edge_seq.size());
  std::vector<std::vector<double>> phi(z.edge_seq.size());
  double pred = 0.0;
  std::vector<double> concat(2 * dd);
  for (std::size_t i = 0; i < z.edge_seq.size(); ++i) {
    const int e = z.edge_seq[i];
    for (int k = 0; k < dd; ++k) concat[k] = theta(e, k);
    for (int k = 0; k < dd; ++k) concat[dd + k] = theta_ctx[k];
    phi[i] = mlp_forward(m.cross, concat, &cross_caches[i]);
    for (int k = 0; k < dd; ++k) pred += phi[i][k] * phi[i][k];
  }

  const double dldy = loss_derivative(loss, huber_delta, pred, t_obs);

  PathBackwardResult res;
  res.grad = zero_grad(m);
  res.prediction = pred;

  std::vector<double> dtheta_ctx(dd, 0.0);
  for (std::size_t i = 0; i < z.edge_seq.size(); ++i) {
    const int e = z.edge_seq[i];
    std::vector<double> dphi(dd);
    for (int k = 0; k < dd; ++k) dphi[k] = dldy * 2.0 * phi[i][k];
    const std::vector<double> dconcat =
        mlp_backward(m.cross, cross_caches[i], dphi, res.grad.cross);
    std::vector<double> dstat(dconcat.begin(), dconcat.begin() + dd);
    for (int k = 0; k < dd; ++k) dtheta_ctx[k] += dconcat[dd + k];
    mlp_backward(m.stat, stat_caches[e], dstat, res.grad.stat);
  }
  mlp_backward(m.ctx, ctx_cache, dtheta_ctx, res.grad.ctx);

  double reg_value = 0.0;
  if (beta != 0.0) {
    std::vector<std::vector<double>> dtheta;
    reg_value = regularizer_cotangents(net, theta, dtheta);
    for (int e = 0; e < net.edge_count(); ++e) {
      for (double& x : dtheta[e]) x *= beta;
      mlp_backward(m.stat, stat_caches[e], dtheta[e], res.grad.stat);
    }
  }

  res.loss = loss_value(loss, huber_delta, pred, t_obs) + beta * reg_value;
  return res;
}

double radius_predict(const RadiusModel& m, const std::vector<double>& theta_ctx) {
  if (m.net.acts.empty() || m.net.acts.back() != Activation::softplus)
    throw Error("radius net must end in a softplus head");
  return mlp_forward(m.net, theta_ctx)[0];
}

std::size_t param_count(const MlpParams& p) {
  std::size_t n = 0;
  for (int l = 0; l < p.layer_count(); ++l) n += p.w[l].size() + p.b[l].size();
  return n;
}

std::size_t param_count(const RepresentationModel& m) {
  return param_count(m.stat) + param_count(m.ctx) + param_count(m.cross);
}

namespace {

template <class F>
void for_each_net(RepresentationModel& m, F f) {
  f(m.stat);
  f(m.ctx);
  f(m.cross);
}
template <class F>
void for_each_net(const RepresentationModel& m, F f) {
  f(m.stat);
  f(m.ctx);
  f(m.cross);
}

}  // namespace

std::vector<double> flatten(const RepresentationModel& m) {
  std::vector<double> out;
  out.reserve(param_count(m));
  for_each_net(m, [&](const MlpParams& p) {
    for (int l = 0; l < p.layer_count(); ++l) {
      out.insert(out.end(), p.w[l].begin(), p.w[l].end());
      out.insert(out.end(), p.b[l].begin(), p.b[l].end());
    }
  });
  return out;
}

std::vector<double> flatten_grad(const RepresentationModel& m, const RepGrad& g) {
  std::vector<double> out;
  out.reserve(param_count(m));
  const MlpGrad* blocks[3] = {&g.stat, &g.ctx, &g.cross};
  int bi = 0;
  for_each_net(m, [&](const MlpParams& p) {
    const MlpGrad& b = *blocks[bi++];
    for (int l = 0; l < p.layer_count(); ++l) {
      out.insert(out.end(), b.w[l].begin(), b.w[l].end());
      out.insert(out.end(), b.b[l].begin(), b.b[l].end());
    }
  });
  return out;
}

void add_flat(RepresentationModel& m, const std::vector<double>& dir,
              double scale) {
  if (dir.size() != param_count(m))
    throw DimMismatch("flat direction size does not match parameter count");
  std::size_t i = 0;
  for_each_net(m, [&](MlpParams& p) {
    for (int l = 0; l < p.layer_count(); ++l) {
      for (double& x : p.w[l]) x += scale * dir[i++];
      for (double& x : p.b[l]) x += scale * dir[i++];
    }
  });
}

void add_grad(RepresentationModel& m, const RepGrad& g, double scale) {
  MlpGrad const* blocks[3] = {&g.stat, &g.ctx, &g.cross};
  int bi = 0;
  for_each_net(m, [&](MlpParams& p) {
    const MlpGrad& b = *blocks[bi++];
    for (int l = 0; l < p.layer_count(); ++l) {
      for (std::size_t k = 0; k < p.w[l].size(); ++k) p.w[l][k] += scale * b.w[l][k];
      for (std::size_t k = 0; k < p.b[l].size(); ++k) p.b[l][k] += scale * b.b[l][k];
    }
  });
}

void grad_accumulate(RepGrad& into, const RepGrad& from) {
  MlpGrad* dst[3] = {&into.stat, &into.ctx, &into.cross};
  const MlpGrad* src[3] = {&from.stat, &from.ctx, &from.cross};
  for (int n = 0; n < 3; ++n) {
    for (std::size_t l = 0; l < dst[n]->w.size(); ++l) {
      for (std::size_t k = 0; k < dst[n]->w[l].size(); ++k)
        dst[n]->w[l][k] += src[n]->w[l][k];
      for (std::size_t k = 0; k < dst[n]->b[l].size(); ++k)
        dst[n]->b[l][k] += src[n]->b[l][k];
    }
  }
}

void grad_scale(RepGrad& g, double s) {
  MlpGrad* blocks[3] = {&g.stat, &g.ctx, &g.cross};
  for (int n = 0; n < 3; ++n) {
    for (auto& w : blocks[n]->w)
      for (double& x : w) x *= s;
    for (auto& b : blocks[n]->b)
      for (double& x : b) x *= s;
  }
}

RepGrad zero_grad(const RepresentationModel& m) {
  return RepGrad{zero_grad(m.stat), zero_grad(m.ctx), zero_grad(m.cross)};
}

namespace {

nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json j;
  j["dims"] = p.dims;
  j["acts"] = nlohmann::json::array();
  for (Activation a : p.acts) j["acts"].push_back(activation_name(a));
  j["w"] = p.w;
  j["b"] = p.b;
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams p;
  p.dims = j.at("dims").get<std::vector<int>>();
  for (const auto& a : j.at("acts"))
    p.acts.push_back(activation_from_name(a.get<std::string>()));
  p.w = j.at("w").get<std::vector<std::vector<double>>>();
  p.b = j.at("b").get<std::vector<std::vector<double>>>();
  validate_mlp(p);
  return p;
}

}  // namespace

std::string model_to_json(const ModelBundle& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["d"] = m.rep.d;
  j["seeds"] = {{"init", m.init_seed}};
  j["nets"]["static"] = mlp_to_json(m.rep.stat);
  j["nets"]["context"] = mlp_to_json(m.rep.ctx);
  j["nets"]["cross"] = mlp_to_json(m.rep.cross);
  if (m.radius) j["nets"]["radius"] = mlp_to_json(m.radius->net);
  return j.dump(2);
}

ModelBundle model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ModelBundle m;
  m.rep.d = j.at("d").get<int>();
  m.init_seed = j.at("seeds").at("init").get<std::uint64_t>();
  m.rep.stat = mlp_from_json(j.at("nets").at("static"));
  m.rep.ctx = mlp_from_json(j.at("nets").at("context"));
  m.rep.cross = mlp_from_json(j.at("nets").at("cross"));
  if (j.at("nets").contains("radius"))
    m.radius = RadiusModel{mlp_from_json(j.at("nets").at("radius"))};
  validate_model(m.rep);
  return m;
}

ModelBundle load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open model file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return model_from_json(ss.str());
}

void save_model(const ModelBundle& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write model file: " + path);
  f << model_to_json(m) << "\n";
}

}  // namespace optigap
