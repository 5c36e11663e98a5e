#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "optigap/common.hpp"
#include "optigap/dca.hpp"
#include "optigap/evalkit.hpp"
#include "optigap/netgraph.hpp"
#include "optigap/nets.hpp"
#include "optigap/policy.hpp"
#include "optigap/scenario.hpp"
#include "optigap/selftest.hpp"
#include "optigap/simworld.hpp"
#include "optigap/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace optigap;

namespace {

constexpr const char* kVersion = "1.0.0";

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// FNV-1a over the canonical (key-sorted) config dump
std::string config_hash(const json& cfg) {
  const std::string s = cfg.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return hex64(h);
}

// manifest next to the outputs: version, seeds, config, config hash
void write_manifest(const fs::path& dir, const std::string& command,
                    std::uint64_t seed, const json& cfg,
                    const json& result = json::object()) {
  json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  json sub;
  sub["world"] = Rng(seed).child(seedtag::world).seed();
  sub["init"] = Rng(seed).child(seedtag::init).seed();
  sub["batches"] = Rng(seed).child(seedtag::batches).seed();
  sub["perturbations"] = Rng(seed).child(seedtag::perturbations).seed();
  sub["restarts"] = Rng(seed).child(seedtag::restarts).seed();
  sub["data"] = Rng(seed).child(seedtag::data).seed();
  sub["incidents"] = Rng(seed).child(seedtag::incidents).seed();
  m["subseeds"] = sub;
  m["config"] = cfg;
  m["config_hash"] = config_hash(cfg);
  if (!result.empty()) m["result"] = result;
  write_file(dir / (command + ".manifest.json"), m.dump(2) + "\n");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// "a,b,c" or "lo:hi:n" (n equally spaced points); "inf" allowed in lists
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> grid;
  if (s.find(':') != std::string::npos) {
    double lo = 0.0, hi = 0.0;
    int n = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 2) {
      throw Error("grid must be lo:hi:n with n >= 2, got: " + s);
    }
    for (int i = 0; i < n; ++i) {
      grid.push_back(lo + (hi - lo) * double(i) / double(n - 1));
    }
    return grid;
  }
  for (const std::string& tok : split_csv(s)) {
    if (tok == "inf") {
      grid.push_back(std::numeric_limits<double>::infinity());
    } else {
      grid.push_back(std::stod(tok));
    }
  }
  if (grid.empty()) throw Error("empty threshold grid: " + s);
  return grid;
}

json network_json(const RoadNetwork& net) {
  json nodes = json::array();
  for (const Node& n : net.nodes) {
    nodes.push_back({{"id", n.id}, {"lat", n.lat}, {"lon", n.lon}});
  }
  json edges = json::array();
  for (const Edge& e : net.edges) {
    edges.push_back({{"id", e.id},
                     {"from", net.nodes[std::size_t(e.from)].id},
                     {"to", net.nodes[std::size_t(e.to)].id},
                     {"length_m", e.length_m},
                     {"features", e.features}});
  }
  return json{{"nodes", nodes}, {"edges", edges}};
}

RoadNetwork network_from_json(const json& j) {
  std::vector<Node> nodes;
  for (const json& n : j.at("nodes")) {
    nodes.push_back(
        {n.at("id").get<std::string>(), n.at("lat").get<double>(),
         n.at("lon").get<double>()});
  }
  std::vector<EdgeSpec> edges;
  for (const json& e : j.at("edges")) {
    EdgeSpec es;
    es.id = e.at("id").get<int>();
    es.from = e.at("from").get<std::string>();
    es.to = e.at("to").get<std::string>();
    es.length_m = e.at("length_m").get<double>();
    es.features = e.at("features").get<std::vector<double>>();
    edges.push_back(std::move(es));
  }
  return build_network(nodes, edges);
}

struct WorldFile {
  RoadNetwork net;
  TrafficOracle world;
};

// world.json: {"net":{"seed","rows","cols"},"world":{seed + cfg}}; the
// network and all world matrices regenerate from the stored seeds
WorldFile load_world_file(const fs::path& path) {
  const json j = json::parse(read_file(path));
  WorldFile wf;
  const json& n = j.at("net");
  wf.net = generate_network(n.at("seed").get<std::uint64_t>(),
                            n.at("rows").get<int>(), n.at("cols").get<int>());
  wf.world = world_from_json(j.at("world").dump(), wf.net);
  return wf;
}

// --network accepts world.json or an explicit network.json
RoadNetwork load_network_any(const fs::path& path) {
  const json j = json::parse(read_file(path));
  if (j.contains("nodes")) return network_from_json(j);
  if (j.contains("net")) {
    const json& n = j.at("net");
    return generate_network(n.at("seed").get<std::uint64_t>(),
                            n.at("rows").get<int>(), n.at("cols").get<int>());
  }
  throw Error("not a network or world file: " + path.string());
}

int warn_threads(int threads) {
  if (threads != 1) {
    std::cerr << "note: execution is single-threaded; --threads " << threads
              << " ignored\n";
  }
  return 1;
}

// ---------------------------------------------------------------------------
// subcommand payloads
// ---------------------------------------------------------------------------

struct GenWorldArgs {
  std::uint64_t seed = 0;
  int rows = 4, cols = 4, d = 8, threads = 1;
  double rho_true = 0.3, noise = 0.0, drift_epoch = 120.0;
  double kappa_opt = 0.9, kappa_pess = 1.15;
  double horizon = 604800.0, median_edge = 30.0;
  std::string depots;
  std::string out_dir;
};

int run_gen_world(const GenWorldArgs& a) {
  warn_threads(a.threads);
  WorldConfig cfg;
  cfg.d = a.d;
  cfg.rho_true = a.rho_true;
  cfg.noise_sigma = a.noise;
  cfg.drift_epoch_s = a.drift_epoch;
  cfg.kappa_opt = a.kappa_opt;
  cfg.kappa_pess = a.kappa_pess;
  cfg.horizon_s = a.horizon;
  cfg.median_edge_s = a.median_edge;
  cfg.depot_ids = split_csv(a.depots);
  if (cfg.depot_ids.empty()) {
    cfg.depot_ids = {"n0_0", "n" + std::to_string(a.rows - 1) + "_" +
                                 std::to_string(a.cols - 1)};
  }

  const RoadNetwork net = generate_network(a.seed, a.rows, a.cols);
  const TrafficOracle w = generate_world(a.seed, net, cfg);

  json wrapper;
  wrapper["net"] = {{"seed", a.seed}, {"rows", a.rows}, {"cols", a.cols}};
  wrapper["world"] = json::parse(world_to_json(w));
  const fs::path dir(a.out_dir);
  write_file(dir / "world.json", wrapper.dump(2) + "\n");
  write_file(dir / "network.json", network_json(net).dump(2) + "\n");

  json cj;
  cj["rows"] = a.rows;
  cj["cols"] = a.cols;
  cj["d"] = a.d;
  cj["rho_true"] = a.rho_true;
  cj["noise"] = a.noise;
  cj["drift_epoch_s"] = a.drift_epoch;
  cj["kappa_opt"] = a.kappa_opt;
  cj["kappa_pess"] = a.kappa_pess;
  cj["horizon_s"] = a.horizon;
  cj["median_edge_s"] = a.median_edge;
  cj["depots"] = cfg.depot_ids;
  write_manifest(dir, "gen-world", a.seed, cj);
  std::cout << "world: " << (dir / "world.json").string() << " ("
            << net.node_count() << " nodes, " << net.edge_count()
            << " edges)\n";
  return 0;
}

struct GenDataArgs {
  std::string world, out = "samples.jsonl";
  int samples = 100, threads = 1;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenDataArgs& a) {
  warn_threads(a.threads);
  const WorldFile wf = load_world_file(a.world);
  const std::vector<Sample> data = generate_dataset(wf.world, a.samples, a.seed);
  const fs::path out(a.out);
  write_file(out, samples_to_jsonl(data, wf.net));
  json cj;
  cj["world"] = a.world;
  cj["samples"] = a.samples;
  cj["out"] = a.out;
  write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."),
                 "gen-data", a.seed, cj);
  std::cout << "samples: " << out.string() << " (" << data.size() << ")\n";
  return 0;
}

struct TrainArgs {
  std::string network, samples, config, out_model = "model.json", trace_csv;
  int threads = 1, d = 8;
  TrainConfig cfg;
  std::string loss = "huber", perturb = "none";
};

int run_train(const CLI::App* cmd, TrainArgs& a) {
  warn_threads(a.threads);
  // --config supplies defaults; explicit flags override its values
  if (!a.config.empty()) {
    const json j = json::parse(read_file(a.config));
    auto flag_given = [&](const std::string& name) {
      return cmd->count(name) > 0;
    };
    if (j.contains("batch") && !flag_given("--batch")) a.cfg.batch = j["batch"];
    if (j.contains("iters") && !flag_given("--iters")) a.cfg.iters = j["iters"];
    if (j.contains("alpha0") && !flag_given("--alpha0")) a.cfg.alpha0 = j["alpha0"];
    if (j.contains("r0") && !flag_given("--r0")) a.cfg.r0 = j["r0"];
    if (j.contains("huber_delta") && !flag_given("--huber-delta"))
      a.cfg.huber_delta = j["huber_delta"];
    if (j.contains("beta") && !flag_given("--beta")) a.cfg.beta = j["beta"];
    if (j.contains("weight_decay") && !flag_given("--weight-decay"))
      a.cfg.weight_decay = j["weight_decay"];
    if (j.contains("seed") && !flag_given("--seed")) a.cfg.seed = j["seed"];
    if (j.contains("holdout") && !flag_given("--holdout")) a.cfg.holdout = j["holdout"];
    if (j.contains("patience") && !flag_given("--patience")) a.cfg.patience = j["patience"];
    if (j.contains("loss") && !flag_given("--loss")) a.loss = j["loss"];
    if (j.contains("perturb") && !flag_given("--perturb")) a.perturb = j["perturb"];
    if (j.contains("d") && !flag_given("--d")) a.d = j["d"];
  }
  if (a.loss == "squared") {
    a.cfg.loss = LossKind::squared;
  } else if (a.loss == "huber") {
    a.cfg.loss = LossKind::huber;
  } else {
    throw Error("unknown loss: " + a.loss);
  }
  if (a.perturb == "none") {
    a.cfg.perturb = PerturbKind::none;
  } else if (a.perturb == "constant") {
    a.cfg.perturb = PerturbKind::constant;
  } else {
    throw Error("unknown perturbation kind: " + a.perturb);
  }

  const RoadNetwork net = load_network_any(a.network);
  const std::vector<Sample> data = load_samples(a.samples, net);
  const std::uint64_t init_seed = Rng(a.cfg.seed).child(seedtag::init).seed();
  const RepresentationModel m0 = default_representation(a.d, init_seed);
  const TrainResult tr = train(m0, net, data, a.cfg);

  ModelBundle bundle;
  bundle.rep = tr.model;
  bundle.init_seed = init_seed;
  save_model(bundle, a.out_model);

  if (!a.trace_csv.empty()) {
    std::string csv = "iter,loss\n";
    for (std::size_t k = 0; k < tr.trace.size(); ++k) {
      csv += std::to_string(k) + "," + fmt_g(tr.trace[k]) + "\n";
    }
    write_file(a.trace_csv, csv);
  }

  json cj;
  cj["network"] = a.network;
  cj["samples"] = a.samples;
  cj["batch"] = a.cfg.batch;
  cj["iters"] = a.cfg.iters;
  cj["alpha0"] = a.cfg.alpha0;
  cj["loss"] = a.loss;
  cj["huber_delta"] = a.cfg.huber_delta;
  cj["beta"] = a.cfg.beta;
  cj["weight_decay"] = a.cfg.weight_decay;
  cj["holdout"] = a.cfg.holdout;
  cj["patience"] = a.cfg.patience;
  cj["perturb"] = a.perturb;
  cj["r0"] = a.cfg.r0;
  cj["d"] = a.d;
  json res;
  res["iterations_run"] = tr.iterations_run;
  res["randomized_index"] = tr.randomized_index;
  res["delta"] = tr.delta;
  res["final_loss"] = tr.trace.empty() ? 0.0 : tr.trace.back();
  const fs::path out(a.out_model);
  write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."),
                 "train", a.cfg.seed, cj, res);
  std::cout << "model: " << a.out_model << " (" << tr.iterations_run
            << " iterations)\n";
  return 0;
}

struct RadiusTargetsArgs {
  std::string world, model, samples, out = "targets.jsonl";
  int count = -1, threads = 1;
  std::uint64_t seed = 0;
};

int run_radius_targets(const RadiusTargetsArgs& a) {
  warn_threads(a.threads);
  const WorldFile wf = load_world_file(a.world);
  const ModelBundle bundle = load_model(a.model);
  const std::vector<Sample> data = load_samples(a.samples, wf.net);
  const int n =
      (a.count < 0) ? int(data.size()) : std::min<int>(a.count, int(data.size()));
  std::string out;
  for (int i = 0; i < n; ++i) {
    const Sample& s = data[std::size_t(i)];
    const Matrix phi = embed_edges(bundle.rep, wf.net, s.context);
    const OdSpec od = make_od_indices(wf.net, {s.origin}, s.dest);
    const TargetRadiusResult res = target_radius(phi, wf.net, od, s.t_s);
    json j;
    j["i"] = i;
    j["rho"] = res.rho;
    j["h_hat"] = res.h_hat;
    j["t"] = s.t_s;
    out += j.dump() + "\n";
  }
  const fs::path op(a.out);
  write_file(op, out);
  json cj;
  cj["world"] = a.world;
  cj["model"] = a.model;
  cj["samples"] = a.samples;
  cj["count"] = n;
  write_manifest(op.has_parent_path() ? op.parent_path() : fs::path("."),
                 "radius-targets", a.seed, cj);
  std::cout << "targets: " << a.out << " (" << n << ")\n";
  return 0;
}

struct FitRadiusArgs {
  std::string model, targets, samples, out_model = "model.json";
  int epochs = 100, threads = 1;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

int run_fit_radius(const FitRadiusArgs& a) {
  warn_threads(a.threads);
  ModelBundle bundle = load_model(a.model);
  // targets.jsonl rows reference samples.jsonl rows by index i
  RoadNetwork net;  // only ids are needed to parse samples; reuse any network
  std::vector<Sample> data;
  {
    // samples carry node ids; parse against a network reconstructed from the
    // sample file itself is impossible, so require the original file format
    // where origin/dest ids resolve through the world used for generation.
    // The context vectors are all fit_radius needs.
    const std::string text = read_file(a.samples);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Sample s;
      s.context = j.at("context").get<std::vector<double>>();
      s.t_s = j.at("t_s").get<double>();
      data.push_back(std::move(s));
    }
  }
  std::vector<std::pair<std::vector<double>, double>> pairs;
  {
    const std::string text = read_file(a.targets);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const int i = j.at("i").get<int>();
      if (i < 0 || i >= int(data.size())) {
        throw Error("target index " + std::to_string(i) +
                    " outside the sample file");
      }
      pairs.emplace_back(
          context_embedding(bundle.rep, data[std::size_t(i)].context),
          j.at("rho").get<double>());
    }
  }
  const RadiusModel r0 = default_radius(
      bundle.rep.d, Rng(a.seed).child(seedtag::init).seed());
  const FitRadiusResult fr = fit_radius(r0, pairs, a.epochs, a.lr);
  bundle.radius = fr.model;
  save_model(bundle, a.out_model);
  json cj;
  cj["model"] = a.model;
  cj["targets"] = a.targets;
  cj["samples"] = a.samples;
  cj["epochs"] = a.epochs;
  cj["lr"] = a.lr;
  json res;
  res["epochs_run"] = fr.mae.size();
  res["final_mae"] = fr.mae.empty() ? 0.0 : fr.mae.back();
  const fs::path out(a.out_model);
  write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."),
                 "fit-radius", a.seed, cj, res);
  std::cout << "radius head: " << a.out_model << " (mae "
            << (fr.mae.empty() ? std::string("n/a") : fmt_g(fr.mae.back()))
            << ")\n";
  return 0;
}

struct DispatchArgs {
  std::string model, network, context_json, dest, risk_curve = "constant";
  std::vector<std::string> depots;
  std::string out = "decision.json";
  double c = 10.0, lambda0 = 0.05, tau_decay = 600.0;
  double eps = 1e-6;
  int max_iter = 50, threads = 1;
  std::uint64_t seed = 0;
  double rho_override = -1.0;
};

int run_dispatch(const DispatchArgs& a) {
  warn_threads(a.threads);
  const ModelBundle bundle = load_model(a.model);
  const RoadNetwork net = load_network_any(a.network);

  std::vector<double> ctx;
  if (!a.context_json.empty() && a.context_json.front() == '[') {
    ctx = json::parse(a.context_json).get<std::vector<double>>();
  } else {
    ctx = json::parse(read_file(a.context_json)).get<std::vector<double>>();
  }

  std::vector<int> depots;
  for (const std::string& id : a.depots) depots.push_back(net.index_of(id));
  const int dest = net.index_of(a.dest);

  ThresholdSpec spec;
  spec.c = a.c;
  spec.lambda0 = a.lambda0;
  spec.tau_decay = a.tau_decay;
  if (a.risk_curve == "constant") {
    spec.kind = RiskCurve::constant;
  } else if (a.risk_curve == "exponential-decay") {
    spec.kind = RiskCurve::exponential_decay;
  } else {
    throw Error("unknown risk curve: " + a.risk_curve);
  }

  GapConfig dca;
  dca.eps = a.eps;
  dca.max_iter = a.max_iter;
  dca.restart_seed = Rng(a.seed).child(seedtag::restarts).seed();

  const double rho = a.rho_override;
  const DispatchDecision dec =
      decide(bundle, net, ctx, depots, dest, spec, dca, nullptr,
             rho >= 0.0 ? &rho : nullptr);
  const fs::path out(a.out);
  write_file(out, decision_to_json(dec, net) + "\n");
  json cj;
  cj["model"] = a.model;
  cj["network"] = a.network;
  cj["depots"] = a.depots;
  cj["dest"] = a.dest;
  cj["C"] = a.c;
  cj["risk_curve"] = a.risk_curve;
  cj["lambda0"] = a.lambda0;
  cj["tau_decay"] = a.tau_decay;
  write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."),
                 "dispatch", a.seed, cj);
  std::cout << "decision: " << a.out << " (dispatch_second "
            << (dec.dispatch_second ? "true" : "false") << ", gap "
            << fmt_g(dec.gap_s) << " s, thr " << fmt_g(dec.thr_s) << " s)\n";
  return 0;
}

struct ReplayArgs {
  std::string world, model, out_dir = ".";
  std::string thr_grid = "0,30,60,120,300";
  int incidents = 100, prefix_q = 5, threads = 1;
  std::uint64_t seed = 0;
};

int run_replay_cmd(const ReplayArgs& a) {
  warn_threads(a.threads);
  const WorldFile wf = load_world_file(a.world);
  const ModelBundle bundle = load_model(a.model);
  const std::vector<Incident> incidents =
      generate_incidents(wf.world, a.incidents, a.seed);
  GapConfig dca;
  dca.restart_seed = Rng(a.seed).child(seedtag::restarts).seed();
  const std::vector<ReplayRecord> records =
      run_replay(wf.world, bundle, incidents, a.prefix_q, dca);
  const std::vector<double> grid = parse_grid(a.thr_grid);

  const fs::path dir(a.out_dir);
  write_file(dir / "records.jsonl", records_to_jsonl(records));
  write_file(dir / "metrics.csv", metrics_csv(metrics_table(records, grid)));
  write_file(dir / "wilcoxon.csv", wilcoxon_csv(records, grid));
  json cj;
  cj["world"] = a.world;
  cj["model"] = a.model;
  cj["incidents"] = a.incidents;
  cj["prefix_q"] = a.prefix_q;
  cj["thr_grid"] = a.thr_grid;
  write_manifest(dir, "replay", a.seed, cj);
  std::cout << "replay: " << (dir / "metrics.csv").string() << " ("
            << records.size() << " incidents)\n";
  return 0;
}

struct SweepArgs {
  std::string records, out = "sweep.csv", grid = "0:600:13";
  int threads = 1;
  std::uint64_t seed = 0;
};

int run_sweep(const SweepArgs& a) {
  warn_threads(a.threads);
  const std::vector<ReplayRecord> records =
      records_from_jsonl(read_file(a.records));
  const std::vector<SweepRow> rows = sweep(records, parse_grid(a.grid));
  const fs::path out(a.out);
  write_file(out, sweep_csv(rows));
  json cj;
  cj["records"] = a.records;
  cj["grid"] = a.grid;
  write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."),
                 "sweep", a.seed, cj);
  std::cout << "sweep: " << a.out << " (" << rows.size() << " points)\n";
  return 0;
}

struct ReportArgs {
  std::string records, out_dir = ".";
  std::string thr_grid = "0,30,60,120,300";
  int threads = 1;
  std::uint64_t seed = 0;
};

int run_report(const ReportArgs& a) {
  warn_threads(a.threads);
  const std::vector<ReplayRecord> records =
      records_from_jsonl(read_file(a.records));
  const std::vector<double> grid = parse_grid(a.thr_grid);
  const fs::path dir(a.out_dir);
  write_file(dir / "metrics.csv", metrics_csv(metrics_table(records, grid)));
  write_file(dir / "wilcoxon.csv", wilcoxon_csv(records, grid));
  json cj;
  cj["records"] = a.records;
  cj["thr_grid"] = a.thr_grid;
  write_manifest(dir, "report", a.seed, cj);
  std::cout << "report: " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

std::string self_path() {
  std::error_code ec;
  const fs::path p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string() : p.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimistic-gap dispatch toolkit"};
  app.require_subcommand(1);

  GenWorldArgs gw;
  CLI::App* c_gw = app.add_subcommand("gen-world", "generate a synthetic world");
  c_gw->add_option("--seed", gw.seed, "master seed")->required();
  c_gw->add_option("--rows", gw.rows, "grid rows");
  c_gw->add_option("--cols", gw.cols, "grid cols");
  c_gw->add_option("--d", gw.d, "hidden embedding dimension");
  c_gw->add_option("--depots", gw.depots, "comma-separated depot node ids");
  c_gw->add_option("--rho-true", gw.rho_true, "drift ball radius");
  c_gw->add_option("--noise", gw.noise, "lognormal segment noise sigma");
  c_gw->add_option("--drift-epoch", gw.drift_epoch, "drift epoch seconds");
  c_gw->add_option("--kappa-opt", gw.kappa_opt, "optimistic multiplier");
  c_gw->add_option("--kappa-pess", gw.kappa_pess, "pessimistic multiplier");
  c_gw->add_option("--horizon", gw.horizon, "horizon seconds");
  c_gw->add_option("--median-edge", gw.median_edge, "median edge seconds");
  c_gw->add_option("--threads", gw.threads, "thread count (1 = bit-exact)");
  c_gw->add_option("--out-dir", gw.out_dir, "output directory")->required();

  GenDataArgs gd;
  CLI::App* c_gd = app.add_subcommand("gen-data", "sample trip records");
  c_gd->add_option("--world", gd.world, "world.json path")->required();
  c_gd->add_option("--samples", gd.samples, "sample count");
  c_gd->add_option("--seed", gd.seed, "sampling seed")->required();
  c_gd->add_option("--threads", gd.threads, "thread count (1 = bit-exact)");
  c_gd->add_option("--out", gd.out, "output samples.jsonl");

  TrainArgs ta;
  CLI::App* c_tr = app.add_subcommand("train", "train the representation model");
  c_tr->add_option("--network", ta.network, "network.json or world.json")->required();
  c_tr->add_option("--samples", ta.samples, "samples.jsonl")->required();
  c_tr->add_option("--config", ta.config, "training config json");
  c_tr->add_option("--out-model", ta.out_model, "output model.json");
  c_tr->add_option("--trace-csv", ta.trace_csv, "loss trace csv path");
  c_tr->add_option("--batch", ta.cfg.batch, "mini-batch size");
  c_tr->add_option("--iters", ta.cfg.iters, "iteration count");
  c_tr->add_option("--alpha0", ta.cfg.alpha0, "base step size");
  c_tr->add_option("--loss", ta.loss, "squared|huber");
  c_tr->add_option("--huber-delta", ta.cfg.huber_delta, "huber corner");
  c_tr->add_option("--beta", ta.cfg.beta, "regularizer weight");
  c_tr->add_option("--weight-decay", ta.cfg.weight_decay, "weight decay");
  c_tr->add_option("--seed", ta.cfg.seed, "training seed");
  c_tr->add_option("--holdout", ta.cfg.holdout, "holdout fraction");
  c_tr->add_option("--patience", ta.cfg.patience, "early-stop patience");
  c_tr->add_option("--perturb", ta.perturb, "none|constant");
  c_tr->add_option("--r0", ta.cfg.r0, "perturbation radius");
  c_tr->add_option("--d", ta.d, "embedding dimension");
  c_tr->add_option("--threads", ta.threads, "thread count (1 = bit-exact)");

  RadiusTargetsArgs rt;
  CLI::App* c_rt = app.add_subcommand("radius-targets", "compute target radii");
  c_rt->add_option("--world", rt.world, "world.json")->required();
  c_rt->add_option("--model", rt.model, "model.json")->required();
  c_rt->add_option("--samples", rt.samples, "samples.jsonl")->required();
  c_rt->add_option("--count", rt.count, "rows to process (default all)");
  c_rt->add_option("--seed", rt.seed, "manifest seed");
  c_rt->add_option("--threads", rt.threads, "thread count (1 = bit-exact)");
  c_rt->add_option("--out", rt.out, "output targets.jsonl");

  FitRadiusArgs fa;
  CLI::App* c_fr = app.add_subcommand("fit-radius", "fit the radius head");
  c_fr->add_option("--model", fa.model, "model.json")->required();
  c_fr->add_option("--targets", fa.targets, "targets.jsonl")->required();
  c_fr->add_option("--samples", fa.samples, "samples.jsonl")->required();
  c_fr->add_option("--epochs", fa.epochs, "epochs");
  c_fr->add_option("--lr", fa.lr, "learning rate");
  c_fr->add_option("--seed", fa.seed, "init seed");
  c_fr->add_option("--threads", fa.threads, "thread count (1 = bit-exact)");
  c_fr->add_option("--out-model", fa.out_model, "output model.json");

  DispatchArgs da;
  CLI::App* c_di = app.add_subcommand("dispatch", "one dispatch decision");
  c_di->add_option("--model", da.model, "model.json")->required();
  c_di->add_option("--network", da.network, "network.json or world.json")->required();
  c_di->add_option("--context-json", da.context_json,
                   "context vector file or inline [..]")->required();
  c_di->add_option("--depot", da.depots, "depot node id (repeatable)")
      ->required()->expected(-1);
  c_di->add_option("--dest", da.dest, "destination node id")->required();
  c_di->add_option("--C", da.c, "second-dispatch cost");
  c_di->add_option("--risk-curve", da.risk_curve, "constant|exponential-decay");
  c_di->add_option("--lambda0", da.lambda0, "risk rate at time zero");
  c_di->add_option("--tau-decay", da.tau_decay, "risk decay constant seconds");
  c_di->add_option("--rho", da.rho_override, "radius override (>= 0)");
  c_di->add_option("--eps", da.eps, "gap tolerance");
  c_di->add_option("--max-iter", da.max_iter, "gap iteration cap");
  c_di->add_option("--seed", da.seed, "restart seed");
  c_di->add_option("--threads", da.threads, "thread count (1 = bit-exact)");
  c_di->add_option("--out", da.out, "output decision.json");

  ReplayArgs ra;
  CLI::App* c_re = app.add_subcommand("replay", "replay incidents");
  c_re->add_option("--world", ra.world, "world.json")->required();
  c_re->add_option("--model", ra.model, "model.json")->required();
  c_re->add_option("--incidents", ra.incidents, "incident count");
  c_re->add_option("--seed", ra.seed, "incident seed")->required();
  c_re->add_option("--prefix-q", ra.prefix_q, "hybrid prefix length");
  c_re->add_option("--thr-grid", ra.thr_grid, "threshold grid");
  c_re->add_option("--threads", ra.threads, "thread count (1 = bit-exact)");
  c_re->add_option("--out-dir", ra.out_dir, "output directory");

  SweepArgs sa;
  CLI::App* c_sw = app.add_subcommand("sweep", "threshold sweep from records");
  c_sw->add_option("--records", sa.records, "records.jsonl")->required();
  c_sw->add_option("--grid", sa.grid, "lo:hi:n or comma list");
  c_sw->add_option("--seed", sa.seed, "manifest seed");
  c_sw->add_option("--threads", sa.threads, "thread count (1 = bit-exact)");
  c_sw->add_option("--out", sa.out, "output sweep.csv");

  ReportArgs pa;
  CLI::App* c_rp = app.add_subcommand("report", "metrics tables from records");
  c_rp->add_option("--records", pa.records, "records.jsonl")->required();
  c_rp->add_option("--thr-grid", pa.thr_grid, "threshold grid");
  c_rp->add_option("--seed", pa.seed, "manifest seed");
  c_rp->add_option("--threads", pa.threads, "thread count (1 = bit-exact)");
  c_rp->add_option("--out-dir", pa.out_dir, "output directory");

  CLI::App* c_st = app.add_subcommand("selftest", "run the acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (c_gw->parsed()) return run_gen_world(gw);
    if (c_gd->parsed()) return run_gen_data(gd);
    if (c_tr->parsed()) return run_train(c_tr, ta);
    if (c_rt->parsed()) return run_radius_targets(rt);
    if (c_fr->parsed()) return run_fit_radius(fa);
    if (c_di->parsed()) return run_dispatch(da);
    if (c_re->parsed()) return run_replay_cmd(ra);
    if (c_sw->parsed()) return run_sweep(sa);
    if (c_rp->parsed()) return run_report(pa);
    if (c_st->parsed()) {
      return selftest::run_all(std::cout, self_path()) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "no subcommand\n";
  return 2;
}
