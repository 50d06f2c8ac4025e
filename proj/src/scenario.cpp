#include "simlab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "simlab/allocation.hpp"
#include "simlab/allocation_oracle.hpp"
#include "simlab/consensus.hpp"
#include "simlab/detection.hpp"
#include "simlab/errors.hpp"
#include "simlab/estimation.hpp"
#include "simlab/graph.hpp"
#include "simlab/projection.hpp"
#include "simlab/rng.hpp"
#include "simlab/special.hpp"
#include "simlab/topology.hpp"

namespace simlab {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit_csv(const CsvTable& table, const std::string& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    out << table.header[i];
  }
  out << "\r\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw IoError("emit_csv: row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!std::isfinite(row[i]))
        throw IoError("emit_csv: refusing to write NaN/Inf at " + path);
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << "\r\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("emit_csv: cannot open " + path);
  file << out.str();
  if (!file) throw IoError("emit_csv: write failed for " + path);
}

void emit_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("emit_json: cannot open " + path);
  file << doc.dump(2) << '\n';
  if (!file) throw IoError("emit_json: write failed for " + path);
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("hash_file: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char chunk[4096];
  while (file.read(chunk, sizeof(chunk)) || file.gcount() > 0) {
    const std::streamsize got = file.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(chunk))) break;
  }
  return h;
}

const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds = {
      "consensus",         "robust-consensus", "estimate",
      "allocate-estimation", "allocate-detection", "detect-fuse",
      "project",           "min-energy",       "rgg-energy",
      "match-topology",    "rgg-spectrum"};
  return kinds;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& doc) {
  ScenarioConfig cfg;
  try {
    cfg.kind = doc.at("kind").get<std::string>();
    cfg.params = doc.value("params", nlohmann::json::object());
    cfg.trials = doc.value("trials", 1);
    cfg.master_seed = doc.value("master_seed", std::uint64_t{0});
    cfg.out_dir = doc.value("out", std::string("."));
    cfg.jobs = doc.value("jobs", 1);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("config: ") + e.what());
  }
  return cfg;
}

namespace {

double require_number(const nlohmann::json& p, const std::string& key) {
  if (!p.contains(key) || !p.at(key).is_number())
    throw ConfigInvalid("params." + key + ": number required");
  return p.at(key).get<double>();
}

double number_or(const nlohmann::json& p, const std::string& key,
                 double fallback) {
  if (!p.contains(key)) return fallback;
  if (!p.at(key).is_number())
    throw ConfigInvalid("params." + key + ": number expected");
  return p.at(key).get<double>();
}

int int_or(const nlohmann::json& p, const std::string& key, int fallback) {
  return static_cast<int>(number_or(p, key, fallback));
}

Vector vector_field(const nlohmann::json& p, const std::string& key) {
  if (!p.contains(key) || !p.at(key).is_array())
    throw ConfigInvalid("params." + key + ": array required");
  const auto& arr = p.at(key);
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw ConfigInvalid("params." + key + ": numeric entries required");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

nlohmann::json vector_to_json(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Graph connected_rgg(int n, double radius, std::uint64_t seed,
                    RggRegion region = RggRegion::UnitSquare,
                    int max_tries = 64) {
  for (int t = 0; t < max_tries; ++t) {
    RggConfig cfg{n, radius, region, seed + static_cast<std::uint64_t>(t)};
    Graph g = sample_rgg(cfg);
    if (spectrum(g).lambda2 > 1e-9) return g;
  }
  throw ConfigInvalid("could not sample a connected RGG at this radius");
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  nlohmann::json canon;
  canon["kind"] = cfg.kind;
  canon["params"] = cfg.params;
  canon["trials"] = cfg.trials;
  canon["master_seed"] = cfg.master_seed;
  return detail::fnv1a(canon.dump());
}

struct KindOutputs {
  std::vector<std::string> files;  // relative names
  nlohmann::json summary;
};

// ---------------------------------------------------------------- consensus
KindOutputs run_consensus_kind(const ScenarioConfig& cfg,
                               const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 20);
  const double radius = number_or(p, "radius", 0.35);
  Graph g = connected_rgg(n, radius,
                          derive_seed(cfg.master_seed, 0, "graph"));
  const auto spec = spectrum(g);
  const double eps =
      number_or(p, "epsilon_frac", 0.5) * 2.0 / spec.eigenvalues(n - 1);

  Rng rng(derive_seed(cfg.master_seed, 0, "x0"));
  Matrix x0(n, 1);
  for (int i = 0; i < n; ++i) x0(i, 0) = rng.uniform();

  ConsensusRun run{g, x0, eps, int_or(p, "max_iters", 100000),
                   number_or(p, "tol", 1e-12)};
  Trajectory t = run_consensus(run);

  nlohmann::json meta;
  meta["epsilon"] = eps;
  meta["seed"] = cfg.master_seed;
  meta["lambda2"] = spec.lambda2;
  export_trajectory_csv(t, dir + "/trajectory.csv", meta.dump());

  KindOutputs out;
  out.files = {"trajectory.csv", "trajectory_meta.json"};
  out.summary["iterations"] = t.iterations;
  out.summary["limit_mean"] = t.limit.col(0).mean();
  out.summary["x0_mean"] = x0.col(0).mean();
  return out;
}

// --------------------------------------------------------- robust-consensus
KindOutputs run_robust_consensus_kind(const ScenarioConfig& cfg,
                                      const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 20);
  const double radius = number_or(p, "radius", 0.35);
  const int n_bits = int_or(p, "n_bits", 6);
  const int iters = int_or(p, "iters", 600);
  std::vector<double> p_links;
  if (p.contains("p_links"))
    for (const auto& v : p.at("p_links")) p_links.push_back(v.get<double>());
  else
    p_links = {0.3, 0.5, 0.8, 1.0};

  Graph g = connected_rgg(n, radius,
                          derive_seed(cfg.master_seed, 0, "graph"));
  const auto spec = spectrum(g);
  const double alpha0 =
      number_or(p, "alpha0_scale", 1.5) / spec.eigenvalues(n - 1);

  const int trials = std::max(cfg.trials, 1);
  // mean disagreement per iteration, one column block per link probability
  CsvTable table;
  table.header = {"iter", "p_link", "mean_disagreement"};

  nlohmann::json per_p = nlohmann::json::array();
  for (std::size_t pi = 0; pi < p_links.size(); ++pi) {
    std::vector<double> mean_dis(iters + 1, 0.0);
    int reached = 0;

    const auto one_trial = [&](int trial) {
      Rng rng(derive_seed(cfg.master_seed, trial, "x0"));
      Matrix x0(n, 1);
      for (int i = 0; i < n; ++i) x0(i, 0) = rng.uniform();
      const double delta = 1.0 / std::exp2(n_bits);
      RobustChannelConfig ch;
      ch.p_link = p_links[pi];
      ch.n_bits = n_bits;
      ch.delta = delta;
      ch.alpha0 = alpha0;
      ch.seed = derive_seed(cfg.master_seed, trial,
                            "channel-p" + std::to_string(pi));
      ch.band_hold = 50;
      ConsensusRun run{g, x0, alpha0, iters, 0.0};
      Trajectory t;
      bool ok = true;
      try {
        t = run_robust_consensus(run, ch);
      } catch (const ConsensusNotConverged& e) {
        t = e.partial;
        ok = false;
      }
      return std::make_pair(t, ok);
    };

    std::vector<std::pair<Trajectory, bool>> results(trials);
    if (cfg.jobs > 1) {
      std::vector<std::future<std::pair<Trajectory, bool>>> futures;
      for (int trial = 0; trial < trials; ++trial)
        futures.push_back(
            std::async(std::launch::async, one_trial, trial));
      for (int trial = 0; trial < trials; ++trial)
        results[trial] = futures[trial].get();
    } else {
      for (int trial = 0; trial < trials; ++trial)
        results[trial] = one_trial(trial);
    }

    for (const auto& [t, ok] : results) {
      if (ok) ++reached;
      for (int k = 0; k <= iters; ++k) {
        const double v =
            k < static_cast<int>(t.disagreement.size())
                ? t.disagreement[k]
                : t.disagreement.back();
        mean_dis[k] += v / trials;
      }
    }
    for (int k = 0; k <= iters; ++k)
      table.rows.push_back({static_cast<double>(k), p_links[pi],
                            mean_dis[k]});
    nlohmann::json entry;
    entry["p_link"] = p_links[pi];
    entry["agreement_reached"] = reached;
    per_p.push_back(entry);
  }

  emit_csv(table, dir + "/disagreement.csv");
  KindOutputs out;
  out.files = {"disagreement.csv"};
  out.summary["per_p"] = per_p;
  out.summary["alpha0"] = alpha0;
  return out;
}

// ----------------------------------------------------------------- estimate
KindOutputs run_estimate_kind(const ScenarioConfig& cfg,
                              const std::string& dir) {
  const auto& p = cfg.params;
  const std::string algo = p.value("algorithm", "A1");
  const int n = int_or(p, "n", 10);
  const int q = int_or(p, "q", 30);
  const int m = int_or(p, "m", 2);

  AdmmConfig acfg;
  acfg.rho = number_or(p, "rho", 30.0);
  acfg.mu = number_or(p, "mu", 0.0);
  acfg.outer_tol = number_or(p, "outer_tol", 1e-8);
  acfg.consensus_tol = number_or(p, "consensus_tol", 1e-10);
  acfg.max_outer = int_or(p, "max_outer", 4000);
  acfg.comm_graph = connected_rgg(
      n, number_or(p, "radius", 0.5),
      derive_seed(cfg.master_seed, 0, "graph"));

  EstimateTrace trace;
  Vector reference;
  if (algo == "A6") {
    Graph g = acfg.comm_graph;
    GmrfScalarModel model = synthesize_gmrf(
        g, number_or(p, "coupling", 0.3), number_or(p, "theta", 1.0),
        derive_seed(cfg.master_seed, 0, "noise"));
    trace = admm_gmrf(model, acfg);
    reference = Vector::Constant(1, gmrf_centralized_estimate(model));
  } else {
    NodeLinearModel model = synthesize_linear_model(
        n, q, m, number_or(p, "noise", 1.0),
        derive_seed(cfg.master_seed, 0, "model"),
        int_or(p, "zero_from", -1));
    if (algo == "A1")
      trace = admm_global_consensus(model, acfg);
    else if (algo == "A2")
      trace = admm_neighbor(model, acfg);
    else if (algo == "A3")
      trace = consensus_ml(model, acfg);
    else if (algo == "A4")
      trace = admm_lasso(model, acfg);
    else
      throw ConfigInvalid("params.algorithm: expected A1..A4 or A6");
    reference = centralized_ml(model);
  }

  CsvTable table;
  table.header = {"outer_iter", "m", "node", "param_index", "theta",
                  "disagreement"};
  for (std::size_t it = 0; it < trace.theta_per_iter.size(); ++it) {
    const Matrix& th = trace.theta_per_iter[it];
    for (Eigen::Index node = 0; node < th.cols(); ++node)
      for (Eigen::Index pi = 0; pi < th.rows(); ++pi)
        table.rows.push_back({static_cast<double>(it + 1),
                              static_cast<double>(trace.cumulative_inner),
                              static_cast<double>(node),
                              static_cast<double>(pi), th(pi, node),
                              trace.disagreement[it]});
  }
  emit_csv(table, dir + "/trace.csv");

  KindOutputs out;
  out.files = {"trace.csv"};
  out.summary["algorithm"] = algo;
  out.summary["outer_iterations"] = trace.outer_iterations;
  out.summary["cumulative_inner"] = trace.cumulative_inner;
  out.summary["reference"] = vector_to_json(reference);
  out.summary["final_mean_estimate"] =
      vector_to_json(trace.final_theta.rowwise().mean());
  return out;
}

// ------------------------------------------------------- allocate-estimation
KindOutputs run_allocate_estimation_kind(const ScenarioConfig& cfg,
                                         const std::string& dir) {
  const auto& p = cfg.params;
  ChannelSet ch(vector_field(p, "a"), vector_field(p, "sigma2"),
                require_number(p, "A"));
  const double eps = require_number(p, "epsilon");
  const auto alloc = solve_estimation_allocation(ch, eps);
  const Vector oracle_p = estimation_allocation_oracle(ch, eps);

  nlohmann::json result;
  result["p"] = vector_to_json(alloc.power);
  result["n"] = vector_to_json(alloc.bits);
  result["lambda"] = alloc.lambda;
  result["objective"] = alloc.total_power;
  result["mse_bound"] = alloc.mse_bound;
  result["oracle_objective"] = oracle_p.sum();
  result["oracle_gap"] = std::fabs(alloc.total_power - oracle_p.sum());
  emit_json(result, dir + "/allocation.json");

  KindOutputs out;
  out.files = {"allocation.json"};
  out.summary = result;
  return out;
}

// -------------------------------------------------------- allocate-detection
KindOutputs run_allocate_detection_kind(const ScenarioConfig& cfg,
                                        const std::string& dir) {
  const auto& p = cfg.params;
  ChannelSet ch(vector_field(p, "a"), vector_field(p, "sigma2"),
                require_number(p, "A"));
  const Vector s = vector_field(p, "s");
  const double pt = require_number(p, "P_T");
  const double pfa = number_or(p, "pfa", 1e-2);
  const auto alloc = solve_detection_allocation(ch, s, pt, pfa);
  const Vector oracle_p = detection_allocation_oracle(ch, s, pt);

  nlohmann::json result;
  result["p"] = vector_to_json(alloc.power);
  result["n"] = vector_to_json(alloc.bits);
  result["lambda"] = alloc.lambda;
  result["objective"] = alloc.deflection;
  result["pd"] = alloc.pd;
  result["oracle_objective"] = detection_deflection(ch, s, oracle_p);
  result["oracle_gap"] =
      std::fabs(alloc.deflection - detection_deflection(ch, s, oracle_p));
  emit_json(result, dir + "/allocation.json");

  KindOutputs out;
  out.files = {"allocation.json"};
  out.summary = result;
  return out;
}

// -------------------------------------------------------------- detect-fuse
KindOutputs run_detect_fuse_kind(const ScenarioConfig& cfg,
                                 const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 10);
  const double amp = number_or(p, "signal_amp", 1.0);
  const double sigma2 = number_or(p, "sigma2", 1.0);
  const double bits = number_or(p, "bits", 6.0);
  const double range = number_or(p, "A", 2.0);
  const int roc_points = int_or(p, "roc_points", 25);

  DeterministicSignalModel model;
  model.signal = Vector(n);
  for (int i = 0; i < n; ++i)
    model.signal(i) =
        amp * std::cos(M_PI * (static_cast<double>(i) / n - 0.5));
  model.noise_cov = sigma2 * Matrix::Identity(n, n);
  model.quant_var =
      Vector::Constant(n, quantization_variance(bits, range));

  CsvTable roc;
  roc.header = {"pfa", "pd"};
  for (int i = 1; i <= roc_points; ++i) {
    const double pfa = static_cast<double>(i) / (roc_points + 1);
    roc.rows.push_back({pfa, detection_probability(model, pfa)});
  }
  emit_csv(roc, dir + "/roc.csv");

  // Chair-Varshney fusion trial: decisions drawn from per-node quality.
  Rng rng(derive_seed(cfg.master_seed, 0, "decisions"));
  LocalDecisionProfile profile;
  profile.p_miss = Vector(n);
  profile.p_false = Vector(n);
  profile.decisions.resize(n);
  for (int i = 0; i < n; ++i) {
    profile.p_miss(i) = 0.05 + 0.4 * rng.uniform();
    profile.p_false(i) = 0.05 + 0.3 * rng.uniform();
    profile.decisions[i] = rng.bernoulli(1.0 - profile.p_miss(i)) ? 1 : 0;
  }
  const auto fusion = chair_varshney_fuse(profile, number_or(p, "eta", 1.0));

  nlohmann::json fusion_doc;
  fusion_doc["p_miss"] = vector_to_json(profile.p_miss);
  fusion_doc["p_false"] = vector_to_json(profile.p_false);
  fusion_doc["decisions"] = profile.decisions;
  fusion_doc["weights"] = vector_to_json(fusion.weights);
  fusion_doc["statistic"] = fusion.statistic;
  fusion_doc["threshold"] = fusion.threshold;
  fusion_doc["decide_h1"] = fusion.decide_h1;
  emit_json(fusion_doc, dir + "/fusion.json");

  KindOutputs out;
  out.files = {"roc.csv", "fusion.json"};
  out.summary["decide_h1"] = fusion.decide_h1;
  out.summary["deflection"] =
      model.signal.dot(model.total_cov().llt().solve(model.signal));
  return out;
}

// ------------------------------------------------------------------ project
KindOutputs run_project_kind(const ScenarioConfig& cfg,
                             const std::string& dir) {
  const auto& p = cfg.params;
  const int grid = int_or(p, "grid_side", 20);
  const int order = int_or(p, "max_order", 4);
  const double radius_steps = number_or(p, "radius_steps", 3.2);

  FieldScenario sc;
  sc.grid_side = grid;
  sc.seed = derive_seed(cfg.master_seed, 0, "fading");
  sc.fading_sigma = number_or(p, "fading_sigma", 0.7);
  sc.side = number_or(p, "side", 10.0);
  sc.spread = number_or(p, "spread", 0.15);
  const int sources = int_or(p, "sources", 4);
  Rng rng(derive_seed(cfg.master_seed, 0, "sources"));
  for (int s = 0; s < sources; ++s) {
    sc.sources.emplace_back(0.15 + 0.7 * rng.uniform(),
                            0.15 + 0.7 * rng.uniform());
    sc.powers.push_back(number_or(p, "power", 1.0));
  }

  const ProjectionNetwork net =
      build_projection_weights_grid(grid, radius_steps, order);
  const DenoiseResult res = denoise_field(sc, net);

  const auto pos = grid_positions(grid);
  const auto dump_field = [&](const Vector& v, const std::string& name) {
    CsvTable t;
    t.header = {"x", "y", "value"};
    for (int i = 0; i < grid * grid; ++i)
      t.rows.push_back({pos(i, 0), pos(i, 1), v(i)});
    emit_csv(t, dir + "/" + name);
  };
  dump_field(res.clean, "field_clean.csv");
  dump_field(res.measured, "field_measured.csv");
  dump_field(res.denoised, "field_denoised.csv");

  KindOutputs out;
  out.files = {"field_clean.csv", "field_measured.csv",
               "field_denoised.csv"};
  out.summary["rmse_measured"] = res.rmse_measured;
  out.summary["rmse_denoised"] = res.rmse_denoised;
  out.summary["iterations"] = res.iterations;
  out.summary["rho_gap"] = net.rho_gap;
  return out;
}

// --------------------------------------------------------------- min-energy
KindOutputs run_min_energy_kind(const ScenarioConfig& cfg,
                                const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 10);
  Rng rng(derive_seed(cfg.master_seed, 0, "positions"));
  Matrix pos(n, 2);
  for (int i = 0; i < n; ++i) {
    pos(i, 0) = rng.uniform();
    pos(i, 1) = rng.uniform();
  }
  DeterministicTopologyProblem prob;
  prob.distances = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        prob.distances(i, j) =
            std::max((pos.row(i) - pos.row(j)).norm(), 1e-3);
  prob.eta = number_or(p, "eta", 4.0);
  prob.alpha = number_or(p, "alpha", 2.0);
  prob.fraunhofer = number_or(p, "r0", 0.1);
  prob.p_min = number_or(p, "p_min", 1.0);
  prob.conn_floor = number_or(p, "conn_floor", 0.05);
  prob.a_threshold = number_or(p, "a_th", 0.09);
  prob.max_inner = int_or(p, "max_inner", 1500);

  const EnergyDesign design = solve_min_energy_topology(prob);

  nlohmann::json doc;
  doc["a_relaxed"] = matrix_to_json(design.a_relaxed);
  doc["a_thresholded"] = matrix_to_json(design.a_binary);
  doc["p"] = matrix_to_json(design.power);
  doc["lambda2"] = design.lambda2;
  doc["energy"] = design.energy;
  doc["mu_star"] = design.mu_star;
  doc["thresholded_connected"] = design.thresholded_connected;
  emit_json(doc, dir + "/design.json");

  KindOutputs out;
  out.files = {"design.json"};
  out.summary["energy"] = design.energy;
  out.summary["lambda2"] = design.lambda2;
  out.summary["mu_star"] = design.mu_star;
  return out;
}

// --------------------------------------------------------------- rgg-energy
KindOutputs run_rgg_energy_kind(const ScenarioConfig& cfg,
                                const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 1000);
  const auto curve =
      analytic_energy_rgg(n, number_or(p, "p_min", 1.0),
                          number_or(p, "eta", 2.0),
                          number_or(p, "r0", 0.05),
                          int_or(p, "points", 200));
  CsvTable t;
  t.header = {"radius", "energy"};
  for (std::size_t i = 0; i < curve.radii.size(); ++i)
    t.rows.push_back({curve.radii[i], curve.energies[i]});
  emit_csv(t, dir + "/energy_curve.csv");

  KindOutputs out;
  out.files = {"energy_curve.csv"};
  out.summary["r_star"] = curve.r_star;
  out.summary["e_star"] = curve.e_star;
  return out;
}

// ------------------------------------------------------------ match-topology
KindOutputs run_match_topology_kind(const ScenarioConfig& cfg,
                                    const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 12);
  const int samples = int_or(p, "samples", 400);
  Graph g = connected_rgg(n, number_or(p, "radius", 0.45),
                          derive_seed(cfg.master_seed, 0, "graph"));
  GmrfScalarModel gm = synthesize_gmrf(
      g, number_or(p, "coupling", 0.4), 0.0,
      derive_seed(cfg.master_seed, 0, "noise"));

  // Draw K field samples and estimate the covariance.
  Rng rng(derive_seed(cfg.master_seed, 0, "samples"));
  Eigen::LLT<Matrix> llt(gm.precision);
  Matrix draws(samples, n);
  for (int k = 0; k < samples; ++k) {
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal();
    draws.row(k) = llt.matrixU().solve(z).transpose();
  }
  const auto est = estimate_covariance(draws);

  MatchingProblem prob;
  prob.covariance = est.c;
  prob.distances = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        prob.distances(i, j) =
            (g.positions().row(i) - g.positions().row(j)).norm();
  prob.eta = number_or(p, "eta", 2.0);
  prob.p_min = number_or(p, "p_min", 1.0);
  prob.rho = number_or(p, "rho", 0.02);
  prob.strategy = p.value("strategy", "SES") == std::string("SMP")
                      ? MatchingStrategy::SMP
                      : MatchingStrategy::SES;

  const PrecisionEstimate result = prob.strategy == MatchingStrategy::SMP
                                       ? solve_smp(prob)
                                       : solve_ses(prob);
  const double eta_i =
      incorrect_link_fraction(gm.precision, result.a_opt, prob.a_threshold);

  nlohmann::json doc;
  doc["A_opt"] = matrix_to_json(result.a_opt);
  auto links = nlohmann::json::array();
  for (const auto& [i, j] : result.links) links.push_back({i, j});
  doc["links"] = std::move(links);
  doc["eta_I"] = eta_i;
  doc["objective"] = result.objective;
  emit_json(doc, dir + "/match.json");

  KindOutputs out;
  out.files = {"match.json"};
  out.summary["eta_I"] = eta_i;
  out.summary["links"] = result.links.size();
  return out;
}

// -------------------------------------------------------------- rgg-spectrum
KindOutputs run_rgg_spectrum_kind(const ScenarioConfig& cfg,
                                  const std::string& dir) {
  const auto& p = cfg.params;
  const int n = int_or(p, "n", 200);
  std::vector<double> radii;
  if (p.contains("radii"))
    for (const auto& v : p.at("radii")) radii.push_back(v.get<double>());
  else
    radii = {0.10, 0.15, 0.20};
  const int trials = std::max(cfg.trials, 1);

  CsvTable t;
  t.header = {"radius", "seed_index", "lambda2", "mean_degree",
              "predicted_lambda2", "predicted_degree"};
  nlohmann::json agg = nlohmann::json::array();
  for (double r : radii) {
    const auto pred = rgg_lambda2_prediction(n, r);
    double sum_l2 = 0.0, sum_deg = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      RggConfig rc{n, r, RggRegion::UnitTorus,
                   derive_seed(cfg.master_seed, trial,
                               "rgg-r" + format_double(r))};
      Graph g = sample_rgg(rc);
      const auto spec = spectrum(g);
      double mean_degree = 0.0;
      for (int i = 0; i < n; ++i) mean_degree += g.in_degree(i) / n;
      sum_l2 += spec.lambda2;
      sum_deg += mean_degree;
      t.rows.push_back({r, static_cast<double>(trial), spec.lambda2,
                        mean_degree, pred.lambda2, pred.mean_degree});
    }
    nlohmann::json entry;
    entry["radius"] = r;
    entry["mean_lambda2"] = sum_l2 / trials;
    entry["mean_degree"] = sum_deg / trials;
    entry["predicted_lambda2"] = pred.lambda2;
    entry["predicted_degree"] = pred.mean_degree;
    agg.push_back(entry);
  }
  emit_csv(t, dir + "/spectrum.csv");

  KindOutputs out;
  out.files = {"spectrum.csv"};
  out.summary["per_radius"] = agg;
  return out;
}

}  // namespace

void validate_scenario(const ScenarioConfig& cfg) {
  const auto& kinds = scenario_kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
    throw ConfigInvalid("kind: unknown scenario '" + cfg.kind + "'");
  if (cfg.trials < 1) throw ConfigInvalid("trials: must be >= 1");

  const auto& p = cfg.params;
  if (cfg.kind == "allocate-estimation") {
    ChannelSet ch(vector_field(p, "a"), vector_field(p, "sigma2"),
                  require_number(p, "A"));
    const double eps = require_number(p, "epsilon");
    if (ch.sigma2.cwiseInverse().sum() <= 1.0 / eps)
      throw ConfigInvalid("params.epsilon: infeasible target");
  } else if (cfg.kind == "allocate-detection") {
    ChannelSet ch(vector_field(p, "a"), vector_field(p, "sigma2"),
                  require_number(p, "A"));
    if (vector_field(p, "s").size() != ch.gain.size())
      throw ConfigInvalid("params.s: size must match channels");
    if (!(require_number(p, "P_T") > 0.0))
      throw ConfigInvalid("params.P_T: must be positive");
  } else if (cfg.kind == "estimate") {
    const std::string algo = p.value("algorithm", "A1");
    if (algo != "A1" && algo != "A2" && algo != "A3" && algo != "A4" &&
        algo != "A6")
      throw ConfigInvalid("params.algorithm: expected A1..A4 or A6");
  } else if (cfg.kind == "project") {
    const int grid = int_or(p, "grid_side", 20);
    const int order = int_or(p, "max_order", 4);
    if (1 + 2 * order >= grid * grid)
      throw ConfigInvalid("params.max_order: subspace too large for grid");
  } else if (cfg.kind == "rgg-spectrum" || cfg.kind == "rgg-energy") {
    if (p.contains("radii"))
      for (const auto& v : p.at("radii"))
        if (!(v.get<double>() > 0.0 && v.get<double>() <= 0.5))
          throw ConfigInvalid("params.radii: torus radii must be in (0, 0.5]");
  } else if (cfg.kind == "min-energy") {
    if (number_or(p, "eta", 4.0) < number_or(p, "alpha", 2.0))
      throw ConfigInvalid("params.eta: must be >= alpha");
  }
}

RunRecord run_scenario(const ScenarioConfig& cfg) {
  validate_scenario(cfg);
  const auto start = std::chrono::steady_clock::now();

  std::filesystem::create_directories(cfg.out_dir);
  const std::string dir = cfg.out_dir;

  KindOutputs outputs;
  try {
    if (cfg.kind == "consensus")
      outputs = run_consensus_kind(cfg, dir);
    else if (cfg.kind == "robust-consensus")
      outputs = run_robust_consensus_kind(cfg, dir);
    else if (cfg.kind == "estimate")
      outputs = run_estimate_kind(cfg, dir);
    else if (cfg.kind == "allocate-estimation")
      outputs = run_allocate_estimation_kind(cfg, dir);
    else if (cfg.kind == "allocate-detection")
      outputs = run_allocate_detection_kind(cfg, dir);
    else if (cfg.kind == "detect-fuse")
      outputs = run_detect_fuse_kind(cfg, dir);
    else if (cfg.kind == "project")
      outputs = run_project_kind(cfg, dir);
    else if (cfg.kind == "min-energy")
      outputs = run_min_energy_kind(cfg, dir);
    else if (cfg.kind == "rgg-energy")
      outputs = run_rgg_energy_kind(cfg, dir);
    else if (cfg.kind == "match-topology")
      outputs = run_match_topology_kind(cfg, dir);
    else if (cfg.kind == "rgg-spectrum")
      outputs = run_rgg_spectrum_kind(cfg, dir);
    else
      throw ConfigInvalid("kind: unknown scenario '" + cfg.kind + "'");
  } catch (const Error&) {
    throw;
  }

  RunRecord record;
  record.kind = cfg.kind;
  record.config_hash = config_hash(cfg);
  for (int trial = 0; trial < cfg.trials; ++trial)
    record.trial_seeds.push_back(
        derive_seed(cfg.master_seed, trial, cfg.kind));
  record.outputs = outputs.files;
  record.summary = outputs.summary;

  nlohmann::json manifest;
  manifest["kind"] = cfg.kind;
  manifest["config_hash"] = record.config_hash;
  manifest["trial_seeds"] = record.trial_seeds;
  auto files = nlohmann::json::array();
  for (const auto& f : outputs.files) {
    nlohmann::json entry;
    entry["path"] = f;
    entry["fnv64"] = hash_file(dir + "/" + f);
    files.push_back(std::move(entry));
  }
  manifest["outputs"] = std::move(files);
  manifest["summary"] = outputs.summary;
  emit_json(manifest, dir + "/manifest.json");
  record.outputs.push_back("manifest.json");

  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return record;
}

}  // namespace simlab
