#include "simlab/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "simlab/rng.hpp"

namespace simlab {

void NodeLinearModel::validate() const {
  if (mixing.empty()) throw Error("NodeLinearModel: no nodes");
  const int q = static_cast<int>(mixing[0].rows());
  const int m = static_cast<int>(mixing[0].cols());
  if (mixing.size() != noise_cov.size() ||
      mixing.size() != measurement.size())
    throw Error("NodeLinearModel: per-node field sizes differ");
  for (std::size_t i = 0; i < mixing.size(); ++i) {
    if (mixing[i].rows() != q || mixing[i].cols() != m)
      throw Error("NodeLinearModel: inconsistent mixing dimensions");
    if (noise_cov[i].rows() != q || noise_cov[i].cols() != q)
      throw Error("NodeLinearModel: inconsistent covariance dimensions");
    if (measurement[i].size() != q)
      throw Error("NodeLinearModel: inconsistent measurement dimensions");
    if (!noise_cov[i].isApprox(noise_cov[i].transpose(), 1e-10))
      throw Error("NodeLinearModel: covariance not symmetric");
    Eigen::LLT<Matrix> llt(noise_cov[i]);
    if (llt.info() != Eigen::Success)
      throw Error("NodeLinearModel: covariance not positive definite");
  }
}

NodeLinearModel synthesize_linear_model(int nodes, int obs_dim, int param_dim,
                                        double noise_scale, std::uint64_t seed,
                                        int zero_from) {
  Rng rng(seed);
  NodeLinearModel model;
  model.true_theta = Vector(param_dim);
  for (int k = 0; k < param_dim; ++k) model.true_theta(k) = rng.normal();
  if (zero_from >= 0)
    for (int k = zero_from; k < param_dim; ++k) model.true_theta(k) = 0.0;

  for (int i = 0; i < nodes; ++i) {
    Matrix a(obs_dim, param_dim);
    for (int r = 0; r < obs_dim; ++r)
      for (int c = 0; c < param_dim; ++c) a(r, c) = rng.normal();
    Matrix root(obs_dim, obs_dim);
    for (int r = 0; r < obs_dim; ++r)
      for (int c = 0; c < obs_dim; ++c) root(r, c) = rng.normal();
    Matrix cov = 0.5 * Matrix::Identity(obs_dim, obs_dim) +
                 (root * root.transpose()) / obs_dim;
    Vector noise(obs_dim);
    {
      Vector z(obs_dim);
      for (int r = 0; r < obs_dim; ++r) z(r) = rng.normal();
      noise = Eigen::LLT<Matrix>(cov).matrixL() * z;
    }
    model.mixing.push_back(a);
    model.noise_cov.push_back(cov);
    model.measurement.push_back(a * model.true_theta + noise_scale * noise);
  }
  return model;
}

Vector centralized_ml(const NodeLinearModel& model) {
  model.validate();
  const int m = model.param_dim();
  Matrix info = Matrix::Zero(m, m);
  Vector rhs = Vector::Zero(m);
  for (int i = 0; i < model.nodes(); ++i) {
    const Matrix white = model.noise_cov[i].llt().solve(model.mixing[i]);
    info += model.mixing[i].transpose() * white;
    rhs += white.transpose() * model.measurement[i];
  }
  Eigen::FullPivLU<Matrix> lu(info);
  if (!lu.isInvertible())
    throw SingularInformation("centralized_ml: information matrix singular");
  return lu.solve(rhs);
}

namespace {

// Precomputed per-node Gaussian pieces: G_i = A'C^-1 A, h_i = A'C^-1 x.
struct GaussianTerms {
  std::vector<Matrix> info;
  std::vector<Vector> rhs;
};

GaussianTerms gaussian_terms(const NodeLinearModel& model) {
  GaussianTerms t;
  for (int i = 0; i < model.nodes(); ++i) {
    const Matrix white = model.noise_cov[i].llt().solve(model.mixing[i]);
    t.info.push_back(model.mixing[i].transpose() * white);
    t.rhs.push_back(white.transpose() * model.measurement[i]);
  }
  return t;
}

double relative_change(const Matrix& next, const Matrix& prev) {
  return (next - prev).norm() / std::max(prev.norm(), 1e-12);
}

// Distributed averaging on the communication graph. Every node ends with its
// own estimate of the column-wise average of `states`; the iteration count
// feeds the cumulative index m.
struct InnerConsensus {
  Matrix w;
  double tol;
  int max_iters;

  InnerConsensus(const AdmmConfig& cfg) {
    const Graph& g = cfg.comm_graph;
    double eps = cfg.consensus_epsilon;
    if (eps <= 0.0) eps = 0.99 / std::max(g.max_in_degree(), 1e-12);
    w = step_matrix(g, eps);
    tol = cfg.consensus_tol;
    max_iters = cfg.max_consensus;
  }

  Matrix average(const Matrix& states, long& counter) const {
    Matrix x = states;
    for (int k = 1; k <= max_iters; ++k) {
      Matrix next = w * x;
      const double change = relative_change(next, x);
      x.swap(next);
      ++counter;
      if (change <= tol) return x;
    }
    throw Error("inner consensus did not converge");
  }
};

void init_state(const NodeLinearModel& model, const GaussianTerms& terms,
                const AdmmConfig& cfg, Matrix& theta, Matrix& lambda) {
  const int m = model.param_dim();
  const int n = model.nodes();
  theta = Matrix::Zero(m, n);
  lambda = Matrix::Zero(m, n);
  if (cfg.random_init) {
    Rng rng(cfg.init_seed);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < m; ++k) theta(k, i) = rng.normal();
    return;
  }
  // Deterministic default: local ridge solution.
  const Matrix eye = Matrix::Identity(m, m);
  for (int i = 0; i < n; ++i)
    theta.col(i) =
        (terms.info[i] + cfg.rho * eye).ldlt().solve(terms.rhs[i]);
}

void record(EstimateTrace& trace, const Graph& g, const Matrix& theta,
            const Vector* z) {
  trace.theta_per_iter.push_back(theta);
  if (z) trace.z_per_iter.push_back(*z);
  trace.disagreement.push_back(theta_disagreement(g, theta));
}

}  // namespace

double theta_disagreement(const Graph& g, const Matrix& theta) {
  double total = 0.0;
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j)
      if (g.weight(i, j) > 0.0)
        total += g.weight(i, j) * (theta.col(j) - theta.col(i)).squaredNorm();
  return total;
}

EstimateTrace admm_global_consensus(const NodeLinearModel& model,
                                    const AdmmConfig& cfg) {
  model.validate();
  const int n = model.nodes();
  const int m = model.param_dim();
  if (cfg.comm_graph.size() != n)
    throw Error("admm_global_consensus: graph size mismatch");
  const GaussianTerms terms = gaussian_terms(model);
  const InnerConsensus inner(cfg);
  const Matrix eye = Matrix::Identity(m, m);

  std::vector<Eigen::LDLT<Matrix>> solvers;
  for (int i = 0; i < n; ++i)
    solvers.emplace_back(terms.info[i] + cfg.rho * eye);

  EstimateTrace trace;
  Matrix theta, lambda;
  init_state(model, terms, cfg, theta, lambda);

  // z_i starts from a consensus average of theta + lambda/rho.
  Matrix z = inner
                 .average((theta + lambda / cfg.rho).transpose(),
                          trace.cumulative_inner)
                 .transpose();

  for (int k = 0; k < cfg.max_outer; ++k) {
    Matrix theta_next(m, n);
    for (int i = 0; i < n; ++i)
      theta_next.col(i) = solvers[i].solve(terms.rhs[i] - lambda.col(i) +
                                           cfg.rho * z.col(i));

    // One consensus run averages theta and lambda together.
    Matrix stacked(n, 2 * m);
    stacked.leftCols(m) = theta_next.transpose();
    stacked.rightCols(m) = lambda.transpose();
    const Matrix averaged = inner.average(stacked, trace.cumulative_inner);
    const Matrix theta_bar = averaged.leftCols(m).transpose();
    const Matrix lambda_bar = averaged.rightCols(m).transpose();

    z = theta_bar + lambda_bar / cfg.rho;
    lambda += cfg.rho * (theta_next - z);

    const double change = relative_change(theta_next, theta);
    theta.swap(theta_next);
    trace.outer_iterations = k + 1;
    Vector z_mean = z.rowwise().mean();
    record(trace, cfg.comm_graph, theta, &z_mean);
    if (change <= cfg.outer_tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final_theta = theta;
  trace.final_z = z.rowwise().mean();
  if (!trace.converged)
    throw EstimationNotConverged("admm_global_consensus: max_outer reached",
                                 trace);
  return trace;
}

EstimateTrace admm_neighbor(const NodeLinearModel& model,
                            const AdmmConfig& cfg) {
  model.validate();
  const int n = model.nodes();
  const int m = model.param_dim();
  if (cfg.comm_graph.size() != n)
    throw Error("admm_neighbor: graph size mismatch");
  const Graph& g = cfg.comm_graph;
  const GaussianTerms terms = gaussian_terms(model);
  const Matrix eye = Matrix::Identity(m, m);

  std::vector<Eigen::LDLT<Matrix>> solvers;
  for (int i = 0; i < n; ++i) {
    const double degree = g.in_degree(i);
    solvers.emplace_back(terms.info[i] + 2.0 * cfg.rho * degree * eye);
  }

  EstimateTrace trace;
  Matrix theta, lambda_unused;
  init_state(model, terms, cfg, theta, lambda_unused);
  // lambda[i] column j holds the multiplier lambda_ij.
  std::vector<Matrix> lambda(n, Matrix::Zero(m, n));

  for (int k = 0; k < cfg.max_outer; ++k) {
    Matrix theta_next(m, n);
    for (int i = 0; i < n; ++i) {
      Vector coupling = Vector::Zero(m);
      for (int j = 0; j < n; ++j) {
        const double a = g.weight(i, j);
        if (a <= 0.0) continue;
        coupling += a * (lambda[i].col(j) - lambda[j].col(i)) +
                    2.0 * cfg.rho * a * theta.col(j);
      }
      theta_next.col(i) = solvers[i].solve(terms.rhs[i] + coupling);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double a = g.weight(i, j);
        if (a <= 0.0) continue;
        lambda[i].col(j) +=
            cfg.rho * a * (theta_next.col(j) - theta_next.col(i));
      }

    const double change = relative_change(theta_next, theta);
    theta.swap(theta_next);
    trace.outer_iterations = k + 1;
    record(trace, g, theta, nullptr);
    if (change <= cfg.outer_tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final_theta = theta;
  trace.final_z = theta.rowwise().mean();
  if (!trace.converged)
    throw EstimationNotConverged("admm_neighbor: max_outer reached", trace);
  return trace;
}

EstimateTrace consensus_ml(const NodeLinearModel& model,
                           const AdmmConfig& cfg) {
  model.validate();
  const int n = model.nodes();
  const int m = model.param_dim();
  if (cfg.comm_graph.size() != n)
    throw Error("consensus_ml: graph size mismatch");
  const Graph& g = cfg.comm_graph;
  const GaussianTerms terms = gaussian_terms(model);

  std::vector<Matrix> gain;  // (A' C^-1 A)^-1 per node
  for (int i = 0; i < n; ++i) {
    Eigen::FullPivLU<Matrix> lu(terms.info[i]);
    if (!lu.isInvertible())
      throw SingularLocalInformation(
          "consensus_ml: node " + std::to_string(i) +
          " has singular local information");
    gain.push_back(lu.inverse());
  }

  // Block iteration x <- (I - eps * blkdiag(G_i^-1) (L (x) I_m)) x; the exact
  // spectral bound of the block operator picks a stable step.
  const Matrix lap = build_laplacian(g);
  double eps = cfg.consensus_epsilon;
  if (eps <= 0.0) {
    Matrix block = Matrix::Zero(n * m, n * m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        block.block(i * m, j * m, m, m) = lap(i, j) * gain[i];
    Eigen::EigenSolver<Matrix> es(block);
    const double rho_max = es.eigenvalues().cwiseAbs().maxCoeff();
    eps = 1.0 / std::max(rho_max, 1e-12);
  }

  EstimateTrace trace;
  Matrix theta(m, n);
  for (int i = 0; i < n; ++i) theta.col(i) = gain[i] * terms.rhs[i];

  for (int k = 0; k < cfg.max_consensus; ++k) {
    Matrix theta_next(m, n);
    for (int i = 0; i < n; ++i) {
      Vector mix = Vector::Zero(m);
      for (int j = 0; j < n; ++j) {
        const double a = g.weight(i, j);
        if (a > 0.0) mix += a * (theta.col(j) - theta.col(i));
      }
      theta_next.col(i) = theta.col(i) + eps * (gain[i] * mix);
    }
    const double change = relative_change(theta_next, theta);
    theta.swap(theta_next);
    trace.outer_iterations = k + 1;
    ++trace.cumulative_inner;
    if ((k % 16) == 0) record(trace, g, theta, nullptr);
    if (change <= cfg.outer_tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final_theta = theta;
  trace.final_z = theta.rowwise().mean();
  if (!trace.converged)
    throw EstimationNotConverged("consensus_ml: max_consensus reached", trace);
  return trace;
}

double soft_threshold(double x, double mu) {
  if (mu < 0.0) throw Error("soft_threshold: mu must be >= 0");
  if (x > mu) return x - mu;
  if (x < -mu) return x + mu;
  return 0.0;
}

Vector soft_threshold(const Vector& x, double mu) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out(i) = soft_threshold(x(i), mu);
  return out;
}

namespace {

// Shared ADMM-lasso loop; `info`/`rhs` already hold the quadratic terms, so
// the batch (A.4) and recursive (A.5) paths reuse it.
EstimateTrace lasso_loop(const Graph& g, const std::vector<Matrix>& info,
                         const std::vector<Vector>& rhs, const AdmmConfig& cfg,
                         Matrix& theta, Matrix& lambda, Matrix& z,
                         long& inner_counter) {
  const int n = static_cast<int>(info.size());
  const int m = static_cast<int>(info[0].rows());
  const Matrix eye = Matrix::Identity(m, m);
  const InnerConsensus inner(cfg);

  std::vector<Eigen::LDLT<Matrix>> solvers;
  for (int i = 0; i < n; ++i) solvers.emplace_back(info[i] + cfg.rho * eye);

  EstimateTrace trace;
  for (int k = 0; k < cfg.max_outer; ++k) {
    Matrix theta_next(m, n);
    for (int i = 0; i < n; ++i)
      theta_next.col(i) =
          solvers[i].solve(rhs[i] - lambda.col(i) + cfg.rho * z.col(i));

    Matrix stacked(n, 2 * m);
    stacked.leftCols(m) = theta_next.transpose();
    stacked.rightCols(m) = lambda.transpose();
    const Matrix averaged = inner.average(stacked, inner_counter);
    const Matrix theta_bar = averaged.leftCols(m).transpose();
    const Matrix lambda_bar = averaged.rightCols(m).transpose();

    const double nd = static_cast<double>(n);
    for (int i = 0; i < n; ++i)
      z.col(i) = soft_threshold(
                     Vector(nd * lambda_bar.col(i) +
                            cfg.rho * nd * theta_bar.col(i)),
                     cfg.mu) /
                 (cfg.rho * nd);
    lambda += cfg.rho * (theta_next - z);

    const double change = relative_change(theta_next, theta);
    theta.swap(theta_next);
    trace.outer_iterations = k + 1;
    Vector z_mean = z.rowwise().mean();
    record(trace, g, theta, &z_mean);
    if (change <= cfg.outer_tol) {
      trace.converged = true;
      break;
    }
  }
  trace.cumulative_inner = inner_counter;
  trace.final_theta = theta;
  trace.final_z = z.rowwise().mean();
  return trace;
}

}  // namespace

EstimateTrace admm_lasso(const NodeLinearModel& model, const AdmmConfig& cfg) {
  model.validate();
  const int n = model.nodes();
  if (cfg.comm_graph.size() != n)
    throw Error("admm_lasso: graph size mismatch");
  const GaussianTerms terms = gaussian_terms(model);

  Matrix theta, lambda;
  init_state(model, terms, cfg, theta, lambda);
  Matrix z = theta;
  long inner = 0;
  EstimateTrace trace = lasso_loop(cfg.comm_graph, terms.info, terms.rhs, cfg,
                                   theta, lambda, z, inner);
  if (!trace.converged)
    throw EstimationNotConverged("admm_lasso: max_outer reached", trace);
  return trace;
}

RlsResult rls_sparse(const std::vector<RlsSnapshot>& stream,
                     const AdmmConfig& cfg, double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw Error("rls_sparse: beta must lie in (0, 1]");
  if (stream.empty()) throw Error("rls_sparse: empty stream");
  const int n = static_cast<int>(stream[0].mixing.size());
  const int m = static_cast<int>(stream[0].mixing[0].cols());
  if (cfg.comm_graph.size() != n)
    throw Error("rls_sparse: graph size mismatch");

  RlsResult result;
  result.z_history = Matrix::Zero(m, static_cast<Eigen::Index>(stream.size()));

  std::vector<Matrix> info(n, Matrix::Zero(m, m));
  std::vector<Vector> rhs(n, Vector::Zero(m));
  Matrix theta = Matrix::Zero(m, n);
  Matrix lambda = Matrix::Zero(m, n);
  Matrix z = Matrix::Zero(m, n);
  long inner = 0;

  for (std::size_t t = 0; t < stream.size(); ++t) {
    const RlsSnapshot& snap = stream[t];
    for (int i = 0; i < n; ++i) {
      const Matrix white = snap.noise_cov[i].llt().solve(snap.mixing[i]);
      info[i] = beta * info[i] + snap.mixing[i].transpose() * white;
      rhs[i] = beta * rhs[i] + white.transpose() * snap.measurement[i];
    }
    EstimateTrace trace =
        lasso_loop(cfg.comm_graph, info, rhs, cfg, theta, lambda, z, inner);
    if (!trace.converged)
      throw EstimationNotConverged(
          "rls_sparse: inner ADMM stalled at time " + std::to_string(t),
          trace);
    result.z_history.col(static_cast<Eigen::Index>(t)) = trace.final_z;
    result.per_time.push_back(std::move(trace));
  }
  return result;
}

void GmrfScalarModel::validate() const {
  const int n = static_cast<int>(precision.rows());
  if (precision.cols() != n || x.size() != n)
    throw Error("GmrfScalarModel: dimension mismatch");
  if (!precision.isApprox(precision.transpose(), 1e-10))
    throw Error("GmrfScalarModel: precision not symmetric");
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NotSPD("GmrfScalarModel: precision not positive definite");
}

GmrfScalarModel synthesize_gmrf(const Graph& rgg, double coupling,
                                double theta, std::uint64_t noise_seed) {
  const int n = rgg.size();
  if (!rgg.has_positions())
    throw Error("synthesize_gmrf: graph must carry positions");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || rgg.weight(i, j) <= 0.0) continue;
      const double r = (rgg.positions().row(i) - rgg.positions().row(j)).norm();
      a(i, j) = -coupling / (1.0 + r);
    }
  for (int i = 0; i < n; ++i)
    a(i, i) = 1.0 + a.row(i).cwiseAbs().sum();

  // Sample v ~ N(0, A^-1) through the Cholesky factor of A.
  Rng rng(noise_seed);
  Vector zv(n);
  for (int i = 0; i < n; ++i) zv(i) = rng.normal();
  Eigen::LLT<Matrix> llt(a);
  const Vector noise =
      llt.matrixU().solve(zv);  // cov = (L L')^-1 = A^-1

  GmrfScalarModel model;
  model.precision = a;
  model.x = Vector::Constant(n, theta) + noise;
  return model;
}

double gmrf_centralized_estimate(const GmrfScalarModel& model) {
  const Vector ones = Vector::Ones(model.precision.rows());
  const double denom = ones.dot(model.precision * ones);
  return ones.dot(model.precision * model.x) / denom;
}

EstimateTrace admm_gmrf(const GmrfScalarModel& model, const AdmmConfig& cfg) {
  model.validate();
  const int n = static_cast<int>(model.precision.rows());

  // Communication graph mirrors the dependency graph.
  Graph g(n, /*directed=*/false);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (model.precision(i, j) != 0.0) g.add_edge(i, j, 1.0);

  std::vector<double> coeff(n), constant(n);
  for (int i = 0; i < n; ++i) {
    double pair_sum = 0.0;
    double pair_rhs = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double aij = model.precision(i, j);
      if (aij == 0.0) continue;
      pair_sum += aij;
      pair_rhs += aij * (model.x(i) + model.x(j));
    }
    coeff[i] = model.precision(i, i) + cfg.rho + 2.0 * pair_sum;
    if (coeff[i] <= 0.0)
      throw NonConvexLocal("admm_gmrf: node " + std::to_string(i) +
                           " local problem not convex; increase rho");
    constant[i] = model.precision(i, i) * model.x(i) + pair_rhs;
  }

  AdmmConfig inner_cfg = cfg;
  inner_cfg.comm_graph = g;
  const InnerConsensus inner(inner_cfg);

  EstimateTrace trace;
  Vector theta = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    theta(i) = constant[i] / std::max(coeff[i] - cfg.rho, 1e-12);
  Vector lambda = Vector::Zero(n);
  Vector z = Vector::Constant(n, theta.mean());

  for (int k = 0; k < cfg.max_outer; ++k) {
    Vector theta_next(n);
    for (int i = 0; i < n; ++i)
      theta_next(i) =
          (cfg.rho * z(i) - lambda(i) + constant[i]) / coeff[i];

    Matrix stacked(n, 2);
    stacked.col(0) = theta_next;
    stacked.col(1) = lambda;
    const Matrix averaged = inner.average(stacked, trace.cumulative_inner);
    z = averaged.col(0) + averaged.col(1) / cfg.rho;
    lambda += cfg.rho * (theta_next - z);

    const double change =
        (theta_next - theta).norm() / std::max(theta.norm(), 1e-12);
    theta = theta_next;
    trace.outer_iterations = k + 1;
    trace.theta_per_iter.push_back(theta.transpose());
    trace.disagreement.push_back(theta_disagreement(g, theta.transpose()));
    if (change <= cfg.outer_tol) {
      trace.converged = true;
      break;
    }
  }
  trace.final_theta = theta.transpose();
  trace.final_z = Vector::Constant(1, theta.mean());
  if (!trace.converged)
    throw EstimationNotConverged("admm_gmrf: max_outer reached", trace);
  return trace;
}

Vector sufficient_statistic_consensus(const Vector& b_values, const Graph& g,
                                      double tol) {
  if (g.directed())
    throw Error("sufficient_statistic_consensus: undirected graph expected");
  ConsensusRun run{g, b_values, 0.99 / std::max(g.max_in_degree(), 1e-12),
                   200000, tol};
  return run_consensus(run).limit.col(0);
}

}  // namespace simlab
