#include "simlab/consensus.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "simlab/rng.hpp"
#include "simlab/scenario.hpp"

namespace simlab {

namespace {

constexpr int kDenseRecordLimit = 10000;
constexpr int kDecimation = 10;

bool should_record(int iter) {
  return iter <= kDenseRecordLimit || iter % kDecimation == 0;
}

// psi[k] relative to the projection onto the consensus subspace.
double disagreement_about_mean(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return centered.squaredNorm();
}

void check_run(const ConsensusRun& run) {
  run.graph.validate();
  if (run.x0.rows() != run.graph.size())
    throw Error("ConsensusRun: x0 row count must equal the node count");
  if (!(run.epsilon > 0.0)) throw Error("ConsensusRun: epsilon must be > 0");
}

}  // namespace

Matrix step_matrix(const Graph& g, double epsilon) {
  const Matrix lap = build_laplacian(g);
  if (epsilon < 0.0) throw StepTooLarge("step_matrix: negative epsilon");
  if (epsilon > 0.0) {
    if (g.directed()) {
      if (epsilon >= 1.0 / g.max_in_degree())
        throw StepTooLarge("step_matrix: epsilon >= 1/d_max");
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> es(lap);
      const double lambda_max = es.eigenvalues().maxCoeff();
      if (lambda_max > 0.0 && epsilon >= 2.0 / lambda_max)
        throw StepTooLarge("step_matrix: epsilon >= 2/lambda_N");
    }
  }
  return Matrix::Identity(g.size(), g.size()) - epsilon * lap;
}

double contraction_modulus(const Matrix& w) {
  Eigen::EigenSolver<Matrix> es(w);
  double mu = 0.0;
  for (int i = 0; i < w.rows(); ++i) {
    const double m = std::abs(es.eigenvalues()(i));
    if (m < 1.0 - 1e-9) mu = std::max(mu, m);
  }
  return mu;
}

namespace {

Trajectory iterate_linear(const Matrix& w, const Matrix& x0, int max_iters,
                          double tol) {
  Trajectory t;
  Matrix x = x0;
  t.states.push_back(x);
  t.recorded_iters.push_back(0);
  t.disagreement.push_back(disagreement_about_mean(x));
  for (int k = 1; k <= max_iters; ++k) {
    Matrix next = w * x;
    const double change = (next - x).norm();
    const double scale = std::max(x.norm(), 1e-12);
    x.swap(next);
    t.iterations = k;
    if (should_record(k)) {
      t.states.push_back(x);
      t.recorded_iters.push_back(k);
    }
    t.disagreement.push_back(disagreement_about_mean(x));
    if (change / scale <= tol) {
      t.converged = true;
      break;
    }
  }
  t.limit = x;
  return t;
}

}  // namespace

Trajectory run_consensus(const ConsensusRun& run) {
  check_run(run);
  const Matrix w = step_matrix(run.graph, run.epsilon);
  Trajectory t = iterate_linear(w, run.x0, run.max_iters, run.tol);
  if (!t.converged)
    throw ConsensusNotConverged("run_consensus: max_iters reached", t);
  return t;
}

Trajectory weighted_consensus(const ConsensusRun& run, const Vector& c) {
  check_run(run);
  if (run.graph.directed())
    throw Error("weighted_consensus: undirected graphs only");
  if ((c.array() <= 0.0).any())
    throw NonPositiveWeight("weighted_consensus: weights must be positive");
  const Matrix lap = build_laplacian(run.graph);
  // x' = -C^{-1} L x discretized; the limit weights states by c.
  const Matrix iteration =
      Matrix::Identity(run.graph.size(), run.graph.size()) -
      run.epsilon * c.cwiseInverse().asDiagonal() * lap;
  Eigen::EigenSolver<Matrix> es(iteration);
  const double rho_interior = [&] {
    double m = 0.0;
    for (int i = 0; i < iteration.rows(); ++i) {
      const double mod = std::abs(es.eigenvalues()(i));
      if (mod < 1.0 - 1e-9) m = std::max(m, mod);
    }
    return m;
  }();
  if (rho_interior >= 1.0)
    throw StepTooLarge("weighted_consensus: epsilon too large for rates c");
  Trajectory t = iterate_linear(iteration, run.x0, run.max_iters, run.tol);
  if (!t.converged)
    throw ConsensusNotConverged("weighted_consensus: max_iters reached", t);
  return t;
}

std::string to_string(LimitKind k) {
  switch (k) {
    case LimitKind::WeightedConsensus: return "WeightedConsensus";
    case LimitKind::AverageConsensus: return "AverageConsensus";
    case LimitKind::ClusterConsensus: return "ClusterConsensus";
    case LimitKind::RootValue: return "RootValue";
  }
  return "?";
}

namespace {

// Left null vector of the Laplacian restricted to a strongly connected
// component; rows of members reference members only, so the restriction is
// self-contained.
Vector component_gamma(const Graph& g, const std::vector<int>& members) {
  const int m = static_cast<int>(members.size());
  if (m == 1) return Vector::Ones(1);
  Matrix sub(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      sub(a, b) = a == b ? 0.0 : g.weight(members[a], members[b]);
  Graph comp(m, /*directed=*/true);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      if (sub(a, b) > 0.0) comp.add_edge(a, b, sub(a, b));
  const Matrix lap = build_laplacian(comp);
  Eigen::JacobiSVD<Matrix> svd(lap.transpose(), Eigen::ComputeFullV);
  Vector gamma = svd.matrixV().col(m - 1);
  if (gamma.sum() < 0.0) gamma = -gamma;
  return gamma / gamma.sum();
}

}  // namespace

DirectedLimit predict_limit(const Graph& g, const Vector& x0) {
  g.validate();
  const int n = g.size();
  if (x0.size() != n) throw Error("predict_limit: x0 size mismatch");
  const auto report = classify_connectivity(g);
  const Matrix lap = build_laplacian(g);

  DirectedLimit out;
  out.values = Vector::Zero(n);
  out.weights = Vector::Zero(n);

  const bool balanced = lap.colwise().sum().cwiseAbs().maxCoeff() < 1e-12;

  if (report.cls == ConnectivityClass::StronglyConnected) {
    Vector gamma = component_gamma(g, report.sccs[0]);
    Vector full = Vector::Zero(n);
    for (std::size_t a = 0; a < report.sccs[0].size(); ++a)
      full(report.sccs[0][a]) = gamma(static_cast<int>(a));
    out.kind = balanced ? LimitKind::AverageConsensus
                        : LimitKind::WeightedConsensus;
    if (balanced) full = Vector::Constant(n, 1.0 / n);
    out.weights = full;
    out.values = Vector::Constant(n, full.dot(x0));
    out.clusters = {report.sccs[0]};
    out.cluster_weights = {gamma};
    return out;
  }

  if (report.cls == ConnectivityClass::QuasiStronglyConnected) {
    const auto& root = report.sccs[report.root_sccs[0]];
    Vector gamma = component_gamma(g, root);
    Vector full = Vector::Zero(n);
    for (std::size_t a = 0; a < root.size(); ++a)
      full(root[a]) = gamma(static_cast<int>(a));
    const double value = full.dot(x0);
    out.kind = root.size() == 1 ? LimitKind::RootValue
                                : LimitKind::WeightedConsensus;
    out.weights = full;
    out.values = Vector::Constant(n, value);
    out.clusters = {root};
    out.cluster_weights = {gamma};
    return out;
  }

  // Weakly connected or disconnected: per-root-cluster consensus plus
  // blended values for the remaining nodes, via the limit projector onto
  // null(L) along range(L).
  out.kind = LimitKind::ClusterConsensus;
  const int k = report.zero_multiplicity;
  Eigen::JacobiSVD<Matrix> svd_r(lap, Eigen::ComputeFullV);
  Eigen::JacobiSVD<Matrix> svd_l(lap.transpose(), Eigen::ComputeFullV);
  const Matrix vr = svd_r.matrixV().rightCols(k);
  const Matrix vl = svd_l.matrixV().rightCols(k);
  const Matrix cross = vl.transpose() * vr;
  const Matrix projector = vr * cross.partialPivLu().solve(vl.transpose());
  out.values = projector * x0;

  for (int root_index : report.root_sccs) {
    const auto& members = report.sccs[root_index];
    Vector gamma = component_gamma(g, members);
    out.clusters.push_back(members);
    out.cluster_weights.push_back(gamma);
    double value = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a)
      value += gamma(static_cast<int>(a)) * x0(members[a]);
    // Exact cluster value overrides the numerically derived projector row.
    for (int node : members) out.values(node) = value;
  }
  return out;
}

double dithered_quantize_scalar(double y, double delta, double dither) {
  const double v = y + dither;
  // b = ceil(v/delta - 1/2) keeps the error inside [-delta/2, delta/2).
  const double b = std::ceil(v / delta - 0.5);
  return b * delta;
}

std::pair<Vector, Vector> dithered_quantize(const Vector& y, double delta,
                                            Rng& rng) {
  if (!(delta > 0.0)) throw Error("dithered_quantize: delta must be > 0");
  Vector q(y.size()), e(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = rng.uniform(-delta / 2.0, delta / 2.0);
    q(i) = dithered_quantize_scalar(y(i), delta, d);
    e(i) = q(i) - (y(i) + d);
  }
  return {q, e};
}

Trajectory run_robust_consensus(const ConsensusRun& run,
                                const RobustChannelConfig& ch) {
  check_run(run);
  if (run.graph.directed())
    throw Error("run_robust_consensus: undirected mean graph expected");
  {
    const auto spec = spectrum(run.graph);
    if (!(spec.lambda2 > 1e-12))
      throw Error("run_robust_consensus: mean graph must be connected");
  }
  if (!(ch.p_link > 0.0 && ch.p_link <= 1.0))
    throw Error("run_robust_consensus: p_link must lie in (0, 1]");

  double delta = ch.delta;
  if (delta < 0.0) delta = std::ldexp(1.0, -ch.n_bits);
  const bool quantized = delta > 0.0;
  const double band =
      ch.agreement_band >= 0.0 ? ch.agreement_band : 4.0 * std::max(delta, 1e-12);

  Rng rng(ch.seed);
  const int n = run.graph.size();
  const int m = static_cast<int>(run.x0.cols());

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (run.graph.weight(i, j) > 0.0) edges.emplace_back(i, j);

  Trajectory t;
  Matrix x = run.x0;
  t.states.push_back(x);
  t.recorded_iters.push_back(0);
  t.disagreement.push_back(disagreement_about_mean(x));

  int in_band = 0;
  for (int k = 1; k <= run.max_iters; ++k) {
    const double alpha =
        ch.decreasing_step ? ch.alpha0 / static_cast<double>(k) : ch.alpha0;
    Matrix delta_x = Matrix::Zero(n, m);
    for (const auto& [i, j] : edges) {
      const bool alive = ch.p_link >= 1.0 || rng.bernoulli(ch.p_link);
      if (!alive) {
        if (quantized) {
          // Keep the dither stream aligned so the iteration count, not the
          // failure pattern, indexes the randomness.
          for (int c = 0; c < 2 * m; ++c) rng.uniform();
        }
        continue;
      }
      const double a = run.graph.weight(i, j);
      for (int c = 0; c < m; ++c) {
        double received_ij = x(j, c);  // value i hears from j
        double received_ji = x(i, c);  // value j hears from i
        if (quantized) {
          const double d_ij = rng.uniform(-delta / 2.0, delta / 2.0);
          const double d_ji = rng.uniform(-delta / 2.0, delta / 2.0);
          received_ij = dithered_quantize_scalar(x(j, c), delta, d_ij);
          received_ji = dithered_quantize_scalar(x(i, c), delta, d_ji);
        }
        delta_x(i, c) += a * (received_ij - x(i, c));
        delta_x(j, c) += a * (received_ji - x(j, c));
      }
    }
    x += alpha * delta_x;
    t.iterations = k;
    if (should_record(k)) {
      t.states.push_back(x);
      t.recorded_iters.push_back(k);
    }
    t.disagreement.push_back(disagreement_about_mean(x));

    const double spread =
        (x.colwise().maxCoeff() - x.colwise().minCoeff()).maxCoeff();
    in_band = spread <= band ? in_band + 1 : 0;
    if (in_band >= ch.band_hold) {
      t.converged = true;
      break;
    }
  }
  t.limit = x;
  if (!t.converged)
    throw ConsensusNotConverged("run_robust_consensus: agreement band not held",
                                t);
  return t;
}

void export_trajectory_csv(const Trajectory& t, const std::string& csv_path,
                           const std::string& metadata_json) {
  CsvTable table;
  table.header = {"iter", "node", "component", "value"};
  for (std::size_t s = 0; s < t.states.size(); ++s) {
    const Matrix& x = t.states[s];
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        table.rows.push_back({static_cast<double>(t.recorded_iters[s]),
                              static_cast<double>(i), static_cast<double>(c),
                              x(i, c)});
  }
  emit_csv(table, csv_path);

  std::string sidecar = csv_path;
  const auto dot = sidecar.rfind(".csv");
  sidecar = (dot == std::string::npos ? sidecar : sidecar.substr(0, dot)) +
            "_meta.json";
  emit_json(nlohmann::json::parse(metadata_json), sidecar);
}

}  // namespace simlab
