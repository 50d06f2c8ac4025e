#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <set>

#include "simlab/errors.hpp"
#include "simlab/graph.hpp"
#include "simlab/rng.hpp"
#include "simlab/special.hpp"
#include "oracles.hpp"

using namespace simlab;

namespace {

Graph complete_graph(int n) {
  Graph g(n, false);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.add_edge(i, j, 1.0);
  return g;
}

Graph random_graph(int n, double edge_prob, bool directed,
                   std::uint64_t seed) {
  Rng rng(seed);
  Graph g(n, directed);
  for (int i = 0; i < n; ++i)
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j) continue;
      if (rng.bernoulli(edge_prob))
        g.add_edge(i, j, 0.2 + rng.uniform());
    }
  return g;
}

}  // namespace

TEST_CASE("laplacian of small graphs") {
  const Matrix l3 = build_laplacian(complete_graph(3));
  Eigen::SelfAdjointEigenSolver<Matrix> es(l3);
  CHECK(es.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(es.eigenvalues()(1) == doctest::Approx(3.0));
  CHECK(es.eigenvalues()(2) == doctest::Approx(3.0));

  Graph path(3, false);
  path.add_edge(0, 1);
  path.add_edge(1, 2);
  Eigen::SelfAdjointEigenSolver<Matrix> esp(build_laplacian(path));
  CHECK(esp.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(esp.eigenvalues()(1) == doctest::Approx(1.0));
  CHECK(esp.eigenvalues()(2) == doctest::Approx(3.0));
}

TEST_CASE("laplacian row sums vanish") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = random_graph(9, 0.4, seed % 2 == 0, seed);
    const Matrix lap = build_laplacian(g);
    const Vector ones = Vector::Ones(g.size());
    CHECK((lap * ones).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("connectivity classification") {
  SUBCASE("directed 2-cycle") {
    Graph g(2, true);
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 0, 1.0);
    const auto rep = classify_connectivity(g);
    CHECK(rep.cls == ConnectivityClass::StronglyConnected);
    CHECK(rep.sccs.size() == 1);
  }

  SUBCASE("influence chain 0 -> 1 -> 2") {
    Graph g(3, true);
    g.add_edge(1, 0, 1.0);  // node 1 listens to node 0
    g.add_edge(2, 1, 1.0);
    const auto rep = classify_connectivity(g);
    CHECK(rep.cls == ConnectivityClass::QuasiStronglyConnected);
    CHECK(rep.sccs.size() == 3);
    REQUIRE(rep.root_sccs.size() == 1);
    CHECK(rep.sccs[rep.root_sccs[0]] == std::vector<int>{0});
  }

  SUBCASE("two isolated nodes") {
    Graph g(2, true);
    const auto rep = classify_connectivity(g);
    CHECK(rep.cls == ConnectivityClass::Disconnected);
    CHECK(rep.zero_multiplicity == 2);
  }

  SUBCASE("weakly connected forest") {
    // two sources feeding a shared sink
    Graph g(3, true);
    g.add_edge(2, 0, 1.0);
    g.add_edge(2, 1, 1.0);
    const auto rep = classify_connectivity(g);
    CHECK(rep.cls == ConnectivityClass::WeaklyConnected);
    CHECK(rep.zero_multiplicity == 2);
  }
}

TEST_CASE("zero multiplicity matches the spectrum on random graphs") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 100; ++seed) {
    const int n = 3 + static_cast<int>(seed % 10);
    const Graph g = random_graph(n, 0.25, seed % 3 != 0, seed * 13 + 1);
    const auto rep = classify_connectivity(g);
    const Matrix lap = build_laplacian(g);
    Eigen::EigenSolver<Matrix> es(lap);
    const double scale =
        std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    int zeros = 0;
    for (int i = 0; i < n; ++i)
      if (std::abs(es.eigenvalues()(i)) <= 1e-9 * scale) ++zeros;
    CHECK(zeros == rep.zero_multiplicity);
    ++checked;
  }
}

TEST_CASE("undirected laplacian is positive semidefinite") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Graph g = random_graph(8, 0.5, false, seed + 100);
    Eigen::SelfAdjointEigenSolver<Matrix> es(build_laplacian(g));
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("spectrum of simple graphs") {
  Graph edge(2, false);
  edge.add_edge(0, 1, 1.0);
  CHECK(spectrum(edge).lambda2 == doctest::Approx(2.0));

  Graph discon(4, false);
  discon.add_edge(0, 1, 1.0);
  discon.add_edge(2, 3, 1.0);
  CHECK(spectrum(discon).lambda2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("left null vector matches a dense nullspace oracle") {
  Graph g(3, true);
  g.add_edge(0, 1, 0.7);
  g.add_edge(1, 2, 1.9);
  g.add_edge(2, 0, 0.4);
  g.add_edge(1, 0, 0.3);
  const auto spec = spectrum(g);
  REQUIRE(spec.has_left_null_vector);

  const Matrix lap = build_laplacian(g);
  Eigen::JacobiSVD<Matrix> svd(lap.transpose(),
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector gamma = svd.matrixV().col(2);
  gamma /= gamma.sum();
  CHECK((spec.left_null_vector - gamma).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(spec.left_null_vector.minCoeff() > 0.0);
  CHECK(spec.left_null_vector.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rgg sampling") {
  SUBCASE("radius one gives the complete graph") {
    RggConfig cfg{2, 1.0, RggRegion::UnitSquare, 7};
    const Graph g = sample_rgg(cfg);
    CHECK(g.weight(0, 1) == 1.0);
  }

  SUBCASE("determinism and relabeling invariance") {
    RggConfig cfg{40, 0.3, RggRegion::UnitSquare, 99};
    const Graph a = sample_rgg(cfg);
    const Graph b = sample_rgg(cfg);
    CHECK(a == b);

    // edge set is a function of positions only
    for (int i = 0; i < a.size(); ++i)
      for (int j = i + 1; j < a.size(); ++j) {
        const bool close =
            rgg_distance(a.positions().row(i), a.positions().row(j),
                         RggRegion::UnitSquare) <= cfg.radius;
        CHECK(close == (a.weight(i, j) > 0.0));
      }
  }

  SUBCASE("coverage radius keeps large graphs connected") {
    const double r = coverage_radius(1000, 1.0);
    int connected = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RggConfig cfg{1000, r, RggRegion::UnitSquare, seed};
      const Graph g = sample_rgg(cfg);
      if (classify_connectivity(g).cls ==
          ConnectivityClass::StronglyConnected)
        ++connected;
    }
    CHECK(connected >= 95);
  }

  SUBCASE("torus mean degree approaches pi r^2 n") {
    const int n = 1000;
    const double r = 0.15;
    double mean_degree = 0.0;
    const int seeds = 20;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      RggConfig cfg{n, r, RggRegion::UnitTorus, 1000 + seed};
      const Graph g = sample_rgg(cfg);
      double deg = 0.0;
      for (int i = 0; i < n; ++i) deg += g.in_degree(i);
      mean_degree += deg / n / seeds;
    }
    const double predicted = M_PI * r * r * n;
    CHECK(std::fabs(mean_degree - predicted) / predicted <= 0.10);
  }
}

TEST_CASE("graph json round trip") {
  Graph g = random_graph(6, 0.5, true, 42);
  Eigen::Matrix<double, Eigen::Dynamic, 2> pos(6, 2);
  for (int i = 0; i < 6; ++i) {
    pos(i, 0) = 0.1 * i;
    pos(i, 1) = 1.0 - 0.1 * i;
  }
  g.set_positions(pos);
  const Graph back = Graph::from_json(g.to_json());
  CHECK(back == g);

  const Graph undirected = random_graph(5, 0.6, false, 43);
  CHECK(Graph::from_json(undirected.to_json()) == undirected);
}

TEST_CASE("graph invariants are enforced") {
  Graph g(3, false);
  CHECK_THROWS_AS(g.add_edge(1, 1, 1.0), Error);
  CHECK_THROWS_AS(g.add_edge(0, 1, -2.0), Error);
}
