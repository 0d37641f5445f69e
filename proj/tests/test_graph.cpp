#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gmg/errors.hpp"
#include "gmg/graph.hpp"
#include "test_util.hpp"

using namespace gmg;

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t.at({i, j});
  return m;
}

Tensor random_adjacency(std::size_t n, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution edge(p);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  return adjacency_from_edges(n, edges);
}

// Independent dense evaluation of I + D^{-1/2} A D^{-1/2}.
Eigen::MatrixXd dense_normalized(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd d = a.rowwise().sum();
  Eigen::MatrixXd dinv = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) dinv(i, i) = d(i) > 0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  return Eigen::MatrixXd::Identity(n, n) + dinv * a * dinv;
}

}  // namespace

TEST_CASE("predefined adjacency") {
  const Tensor a = predefined_adjacency();
  CHECK(a.shape() == Shape{14, 14});
  CHECK(a.at({0, 1}) == 1.0);
  CHECK(a.at({1, 0}) == 1.0);
  for (std::size_t i = 0; i < 14; ++i) {
    CHECK(a.at({i, i}) == 0.0);
    for (std::size_t j = 0; j < 14; ++j) CHECK(a.at({i, j}) == a.at({j, i}));
  }
  // Degree oracle from the written-out edge list.
  const std::pair<int, int> edges[] = {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {6, 7},  {7, 8},  {8, 9},  {10, 11},
                                       {11, 12}, {12, 13}, {13, 10}, {2, 3}, {2, 6}, {3, 6}, {8, 11}};
  std::vector<double> degree(14, 0.0);
  for (auto [i, j] : edges) {
    degree[i] += 1;
    degree[j] += 1;
  }
  CHECK(GmGraph::standard().degrees() == degree);
}

TEST_CASE("normalize_adjacency hand cases") {
  const Tensor l0 = normalize_adjacency(Tensor::zeros({3, 3}));
  CHECK(to_eigen(l0).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  const Tensor l1 = normalize_adjacency(Tensor::from({2, 2}, {0, 1, 1, 0}));
  CHECK(to_eigen(l1) == Eigen::MatrixXd::Ones(2, 2));
  CHECK_THROWS_AS(normalize_adjacency(Tensor::from({2, 2}, {0, 1, 0, 0})), ParameterError);
}

TEST_CASE("normalize_adjacency matches a dense computation and has spectrum in [0,2]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_adjacency(5, rng);
    const Eigen::MatrixXd l = to_eigen(normalize_adjacency(a));
    CHECK((l - dense_normalized(to_eigen(a))).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((l - l.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  // Connected graphs (and the face graph).
  std::vector<Tensor> graphs{predefined_adjacency()};
  for (int trial = 0; trial < 10; ++trial) graphs.push_back(random_adjacency(6, rng, 0.9));
  for (const auto& a : graphs) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(to_eigen(normalize_adjacency(a))).eigenvalues();
    CHECK(ev.minCoeff() > -1e-12);
    CHECK(ev.maxCoeff() < 2.0 + 1e-12);
  }
}

TEST_CASE("chebyshev_filter order 0 is a scaled copy") {
  std::mt19937_64 rng(22);
  const Tensor x = test::random_tensor({5, 3}, rng, false);
  const double theta[] = {2.5};
  const Tensor y = chebyshev_filter(x, random_adjacency(5, rng), theta, 2.0);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == 2.5 * x.data()[i]);
}

TEST_CASE("chebyshev_filter order 1 collapses to theta (I + D^-1/2 A D^-1/2) X") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> coef(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_adjacency(6, rng);
    const Tensor x = test::random_tensor({6, 4}, rng, false);
    const double theta = coef(rng);
    const double thetas[] = {theta, -theta};
    const Eigen::MatrixXd y = to_eigen(chebyshev_filter(x, a, thetas, 2.0));
    const Eigen::MatrixXd closed = theta * dense_normalized(to_eigen(a)) * to_eigen(x);
    CHECK((y - closed).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("chebyshev_filter order 2 matches direct polynomial evaluation") {
  std::mt19937_64 rng(24);
  const Tensor a = random_adjacency(4, rng, 0.8);
  const Tensor x = test::random_tensor({4, 3}, rng, false);
  const double thetas[] = {0.3, -0.7, 1.1};
  const double lambda_max = 1.7;
  // L~ = 2 L_lap / lambda - I, with C_2 = 2 L~^2 - I.
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd lap = 2.0 * id - dense_normalized(to_eigen(a));
  const Eigen::MatrixXd s = 2.0 * lap / lambda_max - id;
  const Eigen::MatrixXd poly = thetas[0] * id + thetas[1] * s + thetas[2] * (2.0 * s * s - id);
  const Eigen::MatrixXd expected = poly * to_eigen(x);
  CHECK((to_eigen(chebyshev_filter(x, a, thetas, lambda_max)) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("GmGraph validation") {
  CHECK_THROWS_AS(GmGraph(Tensor::from({2, 2}, {1, 0, 0, 1})), ParameterError);
  CHECK_THROWS_AS(GmGraph(Tensor::from({2, 2}, {0, 0.5, 0.5, 0})), ParameterError);
  const GmGraph g = GmGraph::standard();
  CHECK(g.num_nodes() == 14);
  CHECK(to_eigen(g.normalized()).isApprox(dense_normalized(to_eigen(predefined_adjacency()))));
}
