#include "simlab/graph.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stack>

#include "simlab/errors.hpp"
#include "simlab/rng.hpp"

namespace simlab {

Graph::Graph(int n, bool directed) : n_(n), directed_(directed) {
  if (n < 1) throw Error("Graph: node count must be positive");
  weights_ = Matrix::Zero(n, n);
}

void Graph::add_edge(int i, int j, double w) {
  if (i == j) throw Error("Graph: self loops are not allowed");
  if (w < 0.0) throw Error("Graph: negative edge weight");
  weights_(i, j) = w;
  if (!directed_) weights_(j, i) = w;
}

double Graph::max_in_degree() const {
  double d = 0.0;
  for (int i = 0; i < n_; ++i) d = std::max(d, in_degree(i));
  return d;
}

std::vector<int> Graph::neighbors_in(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (weights_(i, j) > 0.0) out.push_back(j);
  return out;
}

const Eigen::Matrix<double, Eigen::Dynamic, 2>& Graph::positions() const {
  if (!positions_) throw Error("Graph: positions not set");
  return *positions_;
}

void Graph::set_positions(Eigen::Matrix<double, Eigen::Dynamic, 2> pos) {
  if (pos.rows() != n_) throw Error("Graph: positions size mismatch");
  positions_ = std::move(pos);
}

void Graph::validate() const {
  for (int i = 0; i < n_; ++i) {
    if (weights_(i, i) != 0.0) throw Error("Graph: nonzero diagonal");
    for (int j = 0; j < n_; ++j) {
      if (weights_(i, j) < 0.0) throw Error("Graph: negative weight");
      if (!directed_ && weights_(i, j) != weights_(j, i))
        throw Error("Graph: asymmetric weights in undirected graph");
    }
  }
  if (positions_) {
    for (int i = 0; i < n_; ++i)
      for (int c = 0; c < 2; ++c)
        if ((*positions_)(i, c) < 0.0 || (*positions_)(i, c) > 1.0)
          throw Error("Graph: position outside the unit square");
  }
}

std::string Graph::to_json() const {
  nlohmann::json doc;
  doc["n"] = n_;
  doc["directed"] = directed_;
  auto edges = nlohmann::json::array();
  for (int i = 0; i < n_; ++i) {
    const int j0 = directed_ ? 0 : i + 1;
    for (int j = j0; j < n_; ++j)
      if (weights_(i, j) > 0.0)
        edges.push_back({i, j, weights_(i, j)});
  }
  doc["edges"] = std::move(edges);
  if (positions_) {
    auto pos = nlohmann::json::array();
    for (int i = 0; i < n_; ++i)
      pos.push_back({(*positions_)(i, 0), (*positions_)(i, 1)});
    doc["positions"] = std::move(pos);
  }
  return doc.dump();
}

Graph Graph::from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  Graph g(doc.at("n").get<int>(), doc.at("directed").get<bool>());
  for (const auto& e : doc.at("edges"))
    g.add_edge(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>());
  if (doc.contains("positions")) {
    Eigen::Matrix<double, Eigen::Dynamic, 2> pos(g.size(), 2);
    int i = 0;
    for (const auto& p : doc.at("positions")) {
      pos(i, 0) = p.at(0).get<double>();
      pos(i, 1) = p.at(1).get<double>();
      ++i;
    }
    g.set_positions(std::move(pos));
  }
  return g;
}

bool Graph::operator==(const Graph& other) const {
  if (n_ != other.n_ || directed_ != other.directed_) return false;
  if (weights_ != other.weights_) return false;
  if (positions_.has_value() != other.positions_.has_value()) return false;
  if (positions_ && *positions_ != *other.positions_) return false;
  return true;
}

Matrix build_laplacian(const Graph& g) {
  g.validate();
  Matrix lap = -g.weights();
  for (int i = 0; i < g.size(); ++i) lap(i, i) = g.in_degree(i);
  return lap;
}

std::string to_string(ConnectivityClass c) {
  switch (c) {
    case ConnectivityClass::StronglyConnected: return "StronglyConnected";
    case ConnectivityClass::QuasiStronglyConnected:
      return "QuasiStronglyConnected";
    case ConnectivityClass::WeaklyConnected: return "WeaklyConnected";
    case ConnectivityClass::Disconnected: return "Disconnected";
  }
  return "?";
}

namespace {

// Tarjan over the influence digraph: arc j -> i for a_ij > 0.
struct TarjanState {
  const Matrix* w;
  int n;
  int counter = 0;
  std::vector<int> index, lowlink, scc_of;
  std::vector<bool> on_stack;
  std::stack<int> stack;
  std::vector<std::vector<int>> sccs;

  explicit TarjanState(const Matrix& weights)
      : w(&weights),
        n(static_cast<int>(weights.rows())),
        index(n, -1),
        lowlink(n, 0),
        scc_of(n, -1),
        on_stack(n, false) {}

  void run() {
    for (int v = 0; v < n; ++v)
      if (index[v] < 0) strongconnect(v);
  }

  // Iterative to stay safe on deep graphs.
  void strongconnect(int root) {
    struct Frame {
      int v;
      int next_child;
    };
    std::vector<Frame> frames{{root, 0}};
    open(root);
    while (!frames.empty()) {
      Frame& f = frames.back();
      bool descended = false;
      for (int u = f.next_child; u < n; ++u) {
        // arc f.v -> u exists iff u listens to f.v
        if ((*w)(u, f.v) <= 0.0) continue;
        f.next_child = u + 1;
        if (index[u] < 0) {
          open(u);
          frames.push_back({u, 0});
          descended = true;
          break;
        }
        if (on_stack[u]) lowlink[f.v] = std::min(lowlink[f.v], index[u]);
      }
      if (descended) continue;
      const int v = f.v;
      if (lowlink[v] == index[v]) close(v);
      frames.pop_back();
      if (!frames.empty())
        lowlink[frames.back().v] =
            std::min(lowlink[frames.back().v], lowlink[v]);
    }
  }

  void open(int v) {
    index[v] = lowlink[v] = counter++;
    stack.push(v);
    on_stack[v] = true;
  }

  void close(int v) {
    std::vector<int> comp;
    while (true) {
      const int u = stack.top();
      stack.pop();
      on_stack[u] = false;
      scc_of[u] = static_cast<int>(sccs.size());
      comp.push_back(u);
      if (u == v) break;
    }
    std::sort(comp.begin(), comp.end());
    sccs.push_back(std::move(comp));
  }
};

}  // namespace

ConnectivityReport classify_connectivity(const Graph& g) {
  g.validate();
  const int n = g.size();
  TarjanState tarjan(g.weights());
  tarjan.run();
  const int k = static_cast<int>(tarjan.sccs.size());

  // Root SCCs: no incoming influence from another component, i.e. no member
  // listens to a node outside the component.
  std::vector<bool> has_incoming(k, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g.weight(i, j) > 0.0 && tarjan.scc_of[i] != tarjan.scc_of[j])
        has_incoming[tarjan.scc_of[i]] = true;

  ConnectivityReport report;
  report.sccs = tarjan.sccs;
  for (int c = 0; c < k; ++c)
    if (!has_incoming[c]) report.root_sccs.push_back(c);
  report.zero_multiplicity = static_cast<int>(report.root_sccs.size());

  // Weak connectivity of the underlying undirected graph.
  std::vector<int> comp(n, -1);
  int weak_components = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::stack<int> todo;
    todo.push(s);
    comp[s] = weak_components;
    while (!todo.empty()) {
      const int v = todo.top();
      todo.pop();
      for (int u = 0; u < n; ++u) {
        if (comp[u] >= 0) continue;
        if (g.weight(v, u) > 0.0 || g.weight(u, v) > 0.0) {
          comp[u] = weak_components;
          todo.push(u);
        }
      }
    }
    ++weak_components;
  }

  if (k == 1)
    report.cls = ConnectivityClass::StronglyConnected;
  else if (report.root_sccs.size() == 1)
    report.cls = ConnectivityClass::QuasiStronglyConnected;
  else if (weak_components == 1)
    report.cls = ConnectivityClass::WeaklyConnected;
  else
    report.cls = ConnectivityClass::Disconnected;
  return report;
}

bool is_zero_eigenvalue(double lambda, double lambda_max) {
  return std::fabs(lambda) <= 1e-9 * std::max(1.0, lambda_max);
}

namespace {

// Left null vector of L by shifted inverse iteration on L^T with a fixed
// all-ones start; deterministic and independent of the dense SVD oracle the
// tests use.
Vector left_null_by_inverse_iteration(const Matrix& lap) {
  const int n = static_cast<int>(lap.rows());
  const double scale = std::max(1.0, lap.cwiseAbs().maxCoeff());
  Matrix shifted = lap.transpose();
  for (int i = 0; i < n; ++i) shifted(i, i) += 1e-10 * scale;
  Eigen::PartialPivLU<Matrix> lu(shifted);
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int it = 0; it < 50; ++it) {
    Vector next = lu.solve(v);
    const double norm = next.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw EigenFailure("left null vector: inverse iteration broke down");
    next /= norm;
    if ((next - v).norm() < 1e-14 || (next + v).norm() < 1e-14) {
      v = next;
      break;
    }
    v = next;
  }
  return v;
}

}  // namespace

LaplacianSpectrum spectrum(const Graph& g) {
  const Matrix lap = build_laplacian(g);
  const int n = g.size();
  LaplacianSpectrum out;

  if (!g.directed()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(lap);
    if (es.info() != Eigen::Success)
      throw EigenFailure("spectrum: symmetric eigensolver failed");
    out.eigenvalues = es.eigenvalues();
    out.lambda2 = n >= 2 ? out.eigenvalues(1) : 0.0;
    out.fiedler_vector =
        n >= 2 ? Vector(es.eigenvectors().col(1)) : Vector::Zero(n);
    out.left_null_vector = Vector::Constant(n, 1.0 / n);
    out.has_left_null_vector = true;
    return out;
  }

  Eigen::EigenSolver<Matrix> es(lap);
  if (es.info() != Eigen::Success)
    throw EigenFailure("spectrum: eigensolver failed");
  std::vector<std::pair<double, int>> order(n);
  for (int i = 0; i < n; ++i) order[i] = {es.eigenvalues()(i).real(), i};
  std::sort(order.begin(), order.end());
  out.eigenvalues = Vector(n);
  for (int i = 0; i < n; ++i) out.eigenvalues(i) = order[i].first;
  out.lambda2 = n >= 2 ? out.eigenvalues(1) : 0.0;
  out.fiedler_vector = n >= 2
                           ? Vector(es.eigenvectors().col(order[1].second).real())
                           : Vector::Zero(n);

  const auto report = classify_connectivity(g);
  out.has_left_null_vector =
      report.cls == ConnectivityClass::StronglyConnected;
  if (out.has_left_null_vector) {
    Vector gamma = left_null_by_inverse_iteration(lap);
    const double total = gamma.sum();
    if (std::fabs(total) < 1e-12)
      throw EigenFailure("spectrum: degenerate left null vector");
    gamma /= total;
    out.left_null_vector = gamma;
  } else {
    out.left_null_vector = Vector::Zero(n);
  }
  return out;
}

double rgg_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                    RggRegion region) {
  double dx = std::fabs(a.x() - b.x());
  double dy = std::fabs(a.y() - b.y());
  if (region == RggRegion::UnitTorus) {
    dx = std::min(dx, 1.0 - dx);
    dy = std::min(dy, 1.0 - dy);
  }
  return std::sqrt(dx * dx + dy * dy);
}

Graph sample_rgg(const RggConfig& cfg) {
  if (cfg.n < 2) throw Error("sample_rgg: n must be >= 2");
  if (!(cfg.radius > 0.0)) throw Error("sample_rgg: radius must be positive");
  if (cfg.region == RggRegion::UnitTorus && cfg.radius > 0.5)
    throw Error("sample_rgg: torus radius must be <= 0.5");

  Rng rng(cfg.seed);
  Eigen::Matrix<double, Eigen::Dynamic, 2> pos(cfg.n, 2);
  for (int i = 0; i < cfg.n; ++i) {
    pos(i, 0) = rng.uniform();
    pos(i, 1) = rng.uniform();
  }
  Graph g(cfg.n, /*directed=*/false);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = i + 1; j < cfg.n; ++j)
      if (rgg_distance(pos.row(i), pos.row(j), cfg.region) <= cfg.radius)
        g.add_edge(i, j, 1.0);
  g.set_positions(std::move(pos));
  return g;
}

InsufficientNeighbors::InsufficientNeighbors(int node_, int neighborhood_,
                                             int subspace_dim_)
    : Error("node " + std::to_string(node_) + " has closed neighborhood " +
            std::to_string(neighborhood_) +
            " <= subspace dimension " + std::to_string(subspace_dim_)),
      node(node_),
      neighborhood(neighborhood_),
      subspace_dim(subspace_dim_) {}

}  // namespace simlab
