#include "simlab/projection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "simlab/errors.hpp"
#include "simlab/rng.hpp"

namespace simlab {

std::vector<std::pair<int, int>> fourier_pairs(int max_order) {
  // Half-plane representatives (n > 0, or n == 0 and m > 0) ordered by
  // squared frequency; ties resolved lexicographically for determinism.
  std::vector<std::pair<int, int>> all;
  const int span = 1 + static_cast<int>(std::ceil(std::sqrt(
                           static_cast<double>(2 * max_order + 2))));
  for (int n = 0; n <= span; ++n)
    for (int m = -span; m <= span; ++m) {
      if (n == 0 && m <= 0) continue;
      all.emplace_back(n, m);
    }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    const long fa = static_cast<long>(a.first) * a.first +
                    static_cast<long>(a.second) * a.second;
    const long fb = static_cast<long>(b.first) * b.first +
                    static_cast<long>(b.second) * b.second;
    if (fa != fb) return fa < fb;
    return a < b;
  });
  if (static_cast<int>(all.size()) < max_order)
    throw Error("fourier_pairs: internal span too small");
  all.resize(max_order);
  return all;
}

SignalBasis fourier_basis_2d(
    const Eigen::Matrix<double, Eigen::Dynamic, 2>& positions,
    int max_order) {
  const int n = static_cast<int>(positions.rows());
  if (max_order < 0) throw Error("fourier_basis_2d: negative order");
  const auto pairs = fourier_pairs(max_order);
  const int r = 1 + 2 * max_order;
  if (r >= n)
    throw RankDeficientBasis("fourier_basis_2d: subspace dimension " +
                             std::to_string(r) + " needs more than " +
                             std::to_string(n) + " samples");

  Matrix raw(n, r);
  raw.col(0).setOnes();
  for (int p = 0; p < max_order; ++p) {
    const double fn = pairs[p].first;
    const double fm = pairs[p].second;
    for (int i = 0; i < n; ++i) {
      const double phase =
          2.0 * M_PI * (fn * positions(i, 0) + fm * positions(i, 1));
      raw(i, 1 + 2 * p) = std::cos(phase);
      raw(i, 2 + 2 * p) = std::sin(phase);
    }
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(raw);
  if (qr.rank() < r)
    throw RankDeficientBasis(
        "fourier_basis_2d: sampled basis is rank deficient (" +
        std::to_string(qr.rank()) + " of " + std::to_string(r) + ")");
  // Orthonormalize without pivoting so the column order stays tied to the
  // generator list.
  Eigen::HouseholderQR<Matrix> plain(raw);
  Matrix q = plain.householderQ() * Matrix::Identity(n, r);

  SignalBasis basis;
  basis.u = std::move(q);
  basis.pairs = pairs;
  basis.positions = positions;
  return basis;
}

namespace {

struct EdgeList {
  std::vector<std::pair<int, int>> edges;         // i < j
  std::vector<std::vector<int>> incident;         // node -> edge indices
};

EdgeList collect_edges(const Graph& g) {
  EdgeList e;
  e.incident.resize(g.size());
  for (int i = 0; i < g.size(); ++i)
    for (int j = i + 1; j < g.size(); ++j)
      if (g.weight(i, j) > 0.0) {
        e.incident[i].push_back(static_cast<int>(e.edges.size()));
        e.incident[j].push_back(static_cast<int>(e.edges.size()));
        e.edges.emplace_back(i, j);
      }
  return e;
}

// Shared verification: eigen-structure, rank, the epsilon scan, and the
// C.1/C.2 residuals.
void finalize_network(ProjectionNetwork& net, const Matrix& lap,
                      const Matrix& u) {
  const int n = static_cast<int>(lap.rows());
  const int r = static_cast<int>(u.cols());

  Eigen::SelfAdjointEigenSolver<Matrix> es(lap);
  if (es.info() != Eigen::Success)
    throw EigenFailure("build_projection_weights: eigensolver failed");
  const Vector ev = es.eigenvalues();
  const double lam_max = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);

  int zero_count = 0;
  double min_nonzero = lam_max;
  for (int i = 0; i < n; ++i) {
    if (std::fabs(ev(i)) <= 1e-9 * std::max(1.0, lam_max))
      ++zero_count;
    else
      min_nonzero = std::min(min_nonzero, ev(i));
  }
  net.rank = n - zero_count;
  if (zero_count != r)
    throw RankDeficit("build_projection_weights: null space dimension " +
                      std::to_string(zero_count) + ", expected " +
                      std::to_string(r));

  // epsilon = c / rho(L); the largest c in {1, 1/2, 1/4, ...} with
  // rho(W - UU') < 1. Negative eigenvalues leave no stable step.
  double chosen_eps = -1.0;
  double chosen_rho = 1.0;
  for (double c = 1.0; c > 1e-7; c *= 0.5) {
    const double eps = c / lam_max;
    double rho = 0.0;
    for (int i = 0; i < n; ++i) {
      if (std::fabs(ev(i)) <= 1e-9 * std::max(1.0, lam_max)) continue;
      rho = std::max(rho, std::fabs(1.0 - eps * ev(i)));
    }
    if (rho < 1.0) {
      chosen_eps = eps;
      chosen_rho = rho;
      break;
    }
  }
  if (chosen_eps < 0.0)
    throw NoStableStep(
        "build_projection_weights: no scanned step keeps the spectral "
        "radius below one (min nonzero eigenvalue " +
        std::to_string(min_nonzero) + ")");

  net.l_proj = lap;
  net.epsilon = chosen_eps;
  net.rho_gap = chosen_rho;
  net.basis = u;

  Matrix w_dense = -chosen_eps * lap;
  w_dense.diagonal().array() += 1.0;
  net.w = w_dense.sparseView(1.0, 1e-300);

  const Matrix p = u * u.transpose();
  net.c1_residual = (w_dense * p - p).norm();
  net.c2_residual = (p * w_dense - p).norm();
}

}  // namespace

ProjectionNetwork build_projection_weights(const Graph& g,
                                           const SignalBasis& basis) {
  g.validate();
  if (g.directed())
    throw Error("build_projection_weights: undirected graphs only");
  const int n = g.size();
  const int r = basis.dim();
  if (basis.u.rows() != n)
    throw Error("build_projection_weights: basis size mismatch");

  for (int i = 0; i < n; ++i) {
    const int closed = static_cast<int>(g.neighbors_in(i).size()) + 1;
    if (closed <= r) throw InsufficientNeighbors(i, closed, r);
  }

  // Unknowns: diagonal entries then one weight per undirected edge. The
  // constraints L U = 0 are linear; the solution of minimum distance to the
  // plain graph Laplacian is x0 - A' (A A')^+ A x0.
  const EdgeList el = collect_edges(g);
  const int n_edges = static_cast<int>(el.edges.size());
  const int n_vars = n + n_edges;
  const int n_constraints = n * r;
  const Matrix& u = basis.u;

  Eigen::SparseMatrix<double> constraint(n_constraints, n_vars);
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n_constraints) * 8);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < r; ++k) {
        const int row = i * r + k;
        trip.emplace_back(row, i, u(i, k));
        for (int e : el.incident[i]) {
          const auto [a, b] = el.edges[e];
          const int other = a == i ? b : a;
          trip.emplace_back(row, n + e, u(other, k));
        }
      }
    constraint.setFromTriplets(trip.begin(), trip.end());
  }

  Vector x0(n_vars);
  for (int i = 0; i < n; ++i) x0(i) = g.in_degree(i);
  for (int e = 0; e < n_edges; ++e)
    x0(n + e) = -g.weight(el.edges[e].first, el.edges[e].second);

  // Normal equations with a small ridge plus iterative refinement; the
  // right-hand side lies in the range of A A' so the ridge bias refines away.
  Eigen::SparseMatrix<double> gram = constraint * constraint.transpose();
  double trace = 0.0;
  for (int i = 0; i < n_constraints; ++i) trace += gram.coeff(i, i);
  const double ridge = 1e-12 * std::max(1.0, trace / n_constraints);
  {
    Eigen::SparseMatrix<double> eye(n_constraints, n_constraints);
    eye.setIdentity();
    gram = gram + ridge * eye;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw RankDeficit("build_projection_weights: constraint system failed");

  Vector x = x0;
  for (int pass = 0; pass < 3; ++pass) {
    const Vector residual = constraint * x;
    x -= constraint.transpose() * ldlt.solve(residual);
  }

  Matrix lap = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) lap(i, i) = x(i);
  for (int e = 0; e < n_edges; ++e) {
    const auto [a, b] = el.edges[e];
    lap(a, b) = lap(b, a) = x(n + e);
  }
  if (lap.norm() < 1e-8 * std::sqrt(static_cast<double>(n)))
    throw RankDeficit(
        "build_projection_weights: constraints only admit the zero matrix");

  ProjectionNetwork net;
  finalize_network(net, lap, u);
  return net;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> grid_positions(int grid_side) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> pos(grid_side * grid_side, 2);
  for (int gy = 0; gy < grid_side; ++gy)
    for (int gx = 0; gx < grid_side; ++gx) {
      const int i = gy * grid_side + gx;
      pos(i, 0) = (gx + 0.5) / grid_side;
      pos(i, 1) = (gy + 0.5) / grid_side;
    }
  return pos;
}

ProjectionNetwork build_projection_weights_grid(int grid_side,
                                                double radius_steps,
                                                int max_order) {
  const int g = grid_side;
  const int n = g * g;
  const auto pairs = fourier_pairs(max_order);
  const int r = 1 + 2 * max_order;

  // Offset classes: (dx, dy) and (-dx, -dy) share a stencil coefficient.
  std::vector<std::pair<int, int>> offsets;  // class representatives
  const int reach = static_cast<int>(std::floor(radius_steps));
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx) {
      if (dx == 0 && dy == 0) continue;
      if (dx * dx + dy * dy > radius_steps * radius_steps) continue;
      if (dy < 0 || (dy == 0 && dx < 0)) continue;  // keep one of each pair
      offsets.emplace_back(dx, dy);
    }
  const int closed = 1 + 2 * static_cast<int>(offsets.size());
  if (closed <= r) throw InsufficientNeighbors(0, closed, r);

  // Stencil transform at frequency (fn, fm):
  //   s_hat = s0 + sum_p 2 s_p cos(2 pi (fn dx + fm dy) / g).
  const int n_coef = 1 + static_cast<int>(offsets.size());
  const auto symbol_row = [&](int fn, int fm) {
    Vector row(n_coef);
    row(0) = 1.0;
    for (std::size_t p = 0; p < offsets.size(); ++p)
      row(1 + static_cast<int>(p)) =
          2.0 * std::cos(2.0 * M_PI *
                         (static_cast<double>(fn) * offsets[p].first +
                          static_cast<double>(fm) * offsets[p].second) /
                         g);
    return row;
  };

  // Equality constraints: vanish on the basis frequencies (plus DC).
  std::vector<std::pair<int, int>> null_freqs;
  null_freqs.emplace_back(0, 0);
  for (const auto& pr : pairs) null_freqs.push_back(pr);

  Matrix eq(static_cast<int>(null_freqs.size()), n_coef);
  for (std::size_t q = 0; q < null_freqs.size(); ++q)
    eq.row(static_cast<int>(q)) =
        symbol_row(null_freqs[q].first, null_freqs[q].second).transpose();

  // Least-squares fit of the symbol to the ideal high-pass target (1 away
  // from the basis frequencies) subject to the equalities, via KKT.
  const int half = g / 2;
  std::vector<std::pair<int, int>> fit_freqs;
  for (int fn = -half; fn < g - half; ++fn)
    for (int fm = -half; fm < g - half; ++fm) {
      bool is_null = false;
      for (const auto& nf : null_freqs) {
        if ((fn == nf.first && fm == nf.second) ||
            (fn == -nf.first && fm == -nf.second)) {
          is_null = true;
          break;
        }
      }
      if (!is_null) fit_freqs.emplace_back(fn, fm);
    }

  Matrix design(static_cast<int>(fit_freqs.size()), n_coef);
  for (std::size_t q = 0; q < fit_freqs.size(); ++q)
    design.row(static_cast<int>(q)) =
        symbol_row(fit_freqs[q].first, fit_freqs[q].second).transpose();
  const Vector target = Vector::Ones(static_cast<int>(fit_freqs.size()));

  const int n_eq = static_cast<int>(null_freqs.size());
  Matrix kkt = Matrix::Zero(n_coef + n_eq, n_coef + n_eq);
  kkt.topLeftCorner(n_coef, n_coef) = design.transpose() * design;
  kkt.topRightCorner(n_coef, n_eq) = eq.transpose();
  kkt.bottomLeftCorner(n_eq, n_coef) = eq;
  Vector rhs = Vector::Zero(n_coef + n_eq);
  rhs.head(n_coef) = design.transpose() * target;
  const Vector sol = kkt.fullPivLu().solve(rhs);
  const Vector stencil = sol.head(n_coef);

  // The symbol values are exactly the eigenvalues of the circulant operator.
  double min_off = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < fit_freqs.size(); ++q)
    min_off =
        std::min(min_off, design.row(static_cast<int>(q)).dot(stencil));
  if (!(min_off > 1e-8))
    throw NoStableStep(
        "build_projection_weights_grid: stencil symbol not positive off the "
        "basis; enlarge the radius");

  Matrix lap = Matrix::Zero(n, n);
  const auto wrap = [g](int v) { return ((v % g) + g) % g; };
  for (int gy = 0; gy < g; ++gy)
    for (int gx = 0; gx < g; ++gx) {
      const int i = gy * g + gx;
      lap(i, i) = stencil(0);
      for (std::size_t p = 0; p < offsets.size(); ++p) {
        const auto [dx, dy] = offsets[p];
        const int jp = wrap(gy + dy) * g + wrap(gx + dx);
        const int jm = wrap(gy - dy) * g + wrap(gx - dx);
        lap(i, jp) = stencil(1 + static_cast<int>(p));
        lap(i, jm) = stencil(1 + static_cast<int>(p));
      }
    }

  const SignalBasis basis = fourier_basis_2d(grid_positions(g), max_order);
  ProjectionNetwork net;
  finalize_network(net, lap, basis.u);
  return net;
}

Trajectory run_projection(const ProjectionNetwork& net, const Vector& g0,
                          int max_iters, double tol) {
  const int n = static_cast<int>(net.w.rows());
  if (g0.size() != n) throw Error("run_projection: state size mismatch");

  const Vector projected = net.basis * (net.basis.transpose() * g0);

  Trajectory t;
  Vector z = g0;
  t.states.push_back(z);
  t.recorded_iters.push_back(0);
  t.disagreement.push_back((z - projected).squaredNorm());
  for (int k = 1; k <= max_iters; ++k) {
    Vector next = net.w * z;
    const double change = (next - z).norm() / std::max(z.norm(), 1e-12);
    z.swap(next);
    t.iterations = k;
    if (k <= 10000 || k % 10 == 0) {
      t.states.push_back(z);
      t.recorded_iters.push_back(k);
    }
    t.disagreement.push_back((z - projected).squaredNorm());
    if (change <= tol) {
      t.converged = true;
      break;
    }
  }
  t.limit = z;
  if (!t.converged)
    throw ConsensusNotConverged("run_projection: max_iters reached", t);
  return t;
}

Vector field_values(const FieldScenario& sc) {
  const auto pos = grid_positions(sc.grid_side);
  const int n = static_cast<int>(pos.rows());
  Vector s = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double x = (pos(i, 0) - 0.5) * sc.side;
    const double y = (pos(i, 1) - 0.5) * sc.side;
    for (std::size_t q = 0; q < sc.sources.size(); ++q) {
      const double sx = (sc.sources[q].x() - 0.5) * sc.side;
      const double sy = (sc.sources[q].y() - 0.5) * sc.side;
      const double d2 = (x - sx) * (x - sx) + (y - sy) * (y - sy);
      s(i) += sc.powers[q] / (1.0 + d2 / (sc.spread * sc.spread * sc.side *
                                          sc.side));
    }
  }
  return s;
}

Vector field_fading(const FieldScenario& sc) {
  const int n = sc.grid_side * sc.grid_side;
  Vector a = Vector::Ones(n);
  if (sc.fading_sigma <= 0.0) return a;
  Rng rng(sc.seed);
  for (int i = 0; i < n; ++i)
    a(i) = std::exp(sc.fading_sigma * rng.normal());
  return a;
}

DenoiseResult denoise_field(const FieldScenario& sc,
                            const ProjectionNetwork& net) {
  if (sc.sources.size() != sc.powers.size())
    throw Error("denoise_field: sources/powers mismatch");
  const int n = sc.grid_side * sc.grid_side;
  if (net.w.rows() != n)
    throw Error("denoise_field: network size mismatch");

  DenoiseResult out;
  out.clean = field_values(sc);
  const Vector fading = field_fading(sc);
  out.measured = out.clean.cwiseProduct(fading);
  if ((out.measured.array() <= 0.0).any())
    throw NonPositiveMeasurement("denoise_field: nonpositive measurement");

  Vector logs(n);
  for (int i = 0; i < n; ++i) {
    double v = out.measured(i);
    if (v < 1e-12) {
      v = 1e-12;
      ++out.clamped;
    }
    logs(i) = std::log(v);
  }

  Trajectory t = run_projection(net, logs, 100000, 1e-10);
  out.iterations = t.iterations;
  out.denoised = t.limit.col(0).array().exp();

  const auto rmse = [n](const Vector& a, const Vector& b) {
    return std::sqrt((a - b).squaredNorm() / n);
  };
  out.rmse_measured = rmse(out.measured, out.clean);
  out.rmse_denoised = rmse(out.denoised, out.clean);

  // Projection residual of the clean field itself (pipeline identity when
  // fading is off, up to basis truncation).
  Vector clean_logs = out.clean.array().max(1e-12).log();
  const Vector clean_proj =
      net.basis * (net.basis.transpose() * clean_logs);
  out.modeling_rmse = rmse(clean_proj.array().exp().matrix(), out.clean);
  return out;
}

}  // namespace simlab
