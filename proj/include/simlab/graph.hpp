#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace simlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Weighted (di)graph. The weight convention follows the information flow:
/// weights(i, j) = a_ij > 0 means node i receives the state of node j.
/// For undirected graphs the matrix is symmetric.
class Graph {
 public:
  Graph(int n, bool directed);

  static Graph undirected(int n) { return Graph(n, false); }
  static Graph directed_graph(int n) { return Graph(n, true); }

  int size() const { return n_; }
  bool directed() const { return directed_; }

  double weight(int i, int j) const { return weights_(i, j); }
  const Matrix& weights() const { return weights_; }

  /// Adds an edge j -> i of the given weight (both directions when the
  /// graph is undirected).
  void add_edge(int i, int j, double w = 1.0);

  /// In-degree of node i (sum of incoming weights).
  double in_degree(int i) const { return weights_.row(i).sum(); }
  double max_in_degree() const;

  /// Indices j with a_ij > 0.
  std::vector<int> neighbors_in(int i) const;

  bool has_positions() const { return positions_.has_value(); }
  const Eigen::Matrix<double, Eigen::Dynamic, 2>& positions() const;
  void set_positions(Eigen::Matrix<double, Eigen::Dynamic, 2> pos);

  /// Validates the type invariants (zero diagonal, nonnegative weights,
  /// symmetry for undirected graphs, positions inside the unit square).
  void validate() const;

  std::string to_json() const;
  static Graph from_json(const std::string& text);

  bool operator==(const Graph& other) const;

 private:
  int n_;
  bool directed_;
  Matrix weights_;
  std::optional<Eigen::Matrix<double, Eigen::Dynamic, 2>> positions_;
};

/// L = D - A with the in-degree on the diagonal. Row sums are zero.
Matrix build_laplacian(const Graph& g);

enum class ConnectivityClass {
  StronglyConnected,
  QuasiStronglyConnected,
  WeaklyConnected,
  Disconnected,
};

std::string to_string(ConnectivityClass c);

struct ConnectivityReport {
  ConnectivityClass cls;
  std::vector<std::vector<int>> sccs;  // partition of {0..n-1}
  std::vector<int> root_sccs;          // indices into sccs
  int zero_multiplicity;               // trees in a minimal spanning forest
};

/// Classifies the graph via its strongly connected components and the
/// condensation digraph (influence direction: j -> i when a_ij > 0).
ConnectivityReport classify_connectivity(const Graph& g);

struct LaplacianSpectrum {
  Vector eigenvalues;       // sorted ascending (real parts for digraphs)
  double lambda2;           // algebraic connectivity
  Vector fiedler_vector;    // eigenvector paired with lambda2
  Vector left_null_vector;  // gamma with gamma^T L = 0, sum 1 when it exists
  bool has_left_null_vector;
};

/// Laplacian spectrum. Symmetric graphs use the deterministic
/// tridiagonalization path; digraphs use a Schur decomposition plus shifted
/// inverse iteration (fixed start vector) for the left null vector.
LaplacianSpectrum spectrum(const Graph& g);

/// |lambda| <= 1e-9 * max(1, lambda_max) counts as a zero eigenvalue.
bool is_zero_eigenvalue(double lambda, double lambda_max);

enum class RggRegion { UnitSquare, UnitTorus };

struct RggConfig {
  int n = 2;
  double radius = 0.1;
  RggRegion region = RggRegion::UnitSquare;
  std::uint64_t seed = 0;
};

/// Uniform node placement on [0,1]^2, edge iff pairwise distance <= radius
/// (component-wise wrap-around metric on the torus). Deterministic per seed.
Graph sample_rgg(const RggConfig& cfg);

/// Pairwise distance honoring the region metric.
double rgg_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                    RggRegion region);

}  // namespace simlab
