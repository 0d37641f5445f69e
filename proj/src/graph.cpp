#include "gmg/graph.hpp"

#include <cmath>
#include <string>

#include "gmg/errors.hpp"
#include "gmg/geometry.hpp"

namespace gmg {

namespace {

void check_square(const Tensor& a, const char* what) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw ParameterError(std::string(what) + ": adjacency must be square, got " + shape_str(a.shape()));
  }
}

// D^{-1/2} A D^{-1/2} as a plain buffer.
std::vector<double> normalized_adjacency(const Tensor& a) {
  const std::size_t n = a.dim(0);
  const auto v = a.data();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += v[i * n + j];
    inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = inv_sqrt[i] * v[i * n + j] * inv_sqrt[j];
  return out;
}

}  // namespace

const std::vector<Edge>& predefined_edges() {
  static const std::vector<Edge> edges{
      {0, 1},  {1, 2},                       // left brow
      {3, 4},  {4, 5},                       // right brow
      {6, 7},  {7, 8},   {8, 9},             // nose
      {10, 11}, {11, 12}, {12, 13}, {13, 10},  // mouth ring
      {2, 3},  {2, 6},   {3, 6},   {8, 11},  // bridges
  };
  return edges;
}

Tensor adjacency_from_edges(std::size_t num_nodes, std::span<const Edge> edges) {
  std::vector<double> a(num_nodes * num_nodes, 0.0);
  for (const auto& [i, j] : edges) {
    if (i >= num_nodes || j >= num_nodes || i == j) {
      throw ParameterError("invalid edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    a[i * num_nodes + j] = 1.0;
    a[j * num_nodes + i] = 1.0;
  }
  return Tensor::from({num_nodes, num_nodes}, std::move(a));
}

Tensor predefined_adjacency() { return adjacency_from_edges(kGraphNodes, predefined_edges()); }

Tensor normalize_adjacency(const Tensor& adjacency) {
  check_square(adjacency, "normalize_adjacency");
  const std::size_t n = adjacency.dim(0);
  const auto v = adjacency.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (v[i * n + j] < 0.0) throw ParameterError("normalize_adjacency: negative entry");
      if (v[i * n + j] != v[j * n + i]) throw ParameterError("normalize_adjacency: adjacency is not symmetric");
    }
  auto out = normalized_adjacency(adjacency);
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] += 1.0;
  return Tensor::from({n, n}, std::move(out));
}

Tensor chebyshev_filter(const Tensor& x, const Tensor& adjacency, std::span<const double> thetas,
                        double lambda_max) {
  check_square(adjacency, "chebyshev_filter");
  if (thetas.empty()) throw ParameterError("chebyshev_filter: need at least one coefficient");
  if (!(lambda_max > 0.0)) throw ParameterError("chebyshev_filter: lambda_max must be positive");
  const std::size_t n = adjacency.dim(0);
  if (x.rank() != 2 || x.dim(0) != n) {
    throw ShapeError("chebyshev_filter: features " + shape_str(x.shape()) + " do not match " + std::to_string(n) +
                     " nodes");
  }
  // Scaled Laplacian 2 (I - N) / lambda_max - I.
  auto scaled = normalized_adjacency(adjacency);
  for (double& v : scaled) v *= -2.0 / lambda_max;
  for (std::size_t i = 0; i < n; ++i) scaled[i * n + i] += 2.0 / lambda_max - 1.0;
  const Tensor op = Tensor::from({n, n}, std::move(scaled));

  // C_0 X = X, C_1 X = L~ X, C_r X = 2 L~ C_{r-1} X - C_{r-2} X.
  Tensor prev = x.detach();
  Tensor out = scale(prev, thetas[0]);
  if (thetas.size() == 1) return out;
  Tensor curr = matmul(op, prev);
  out = out + scale(curr, thetas[1]);
  for (std::size_t r = 2; r < thetas.size(); ++r) {
    Tensor next = scale(matmul(op, curr), 2.0) - prev;
    out = out + scale(next, thetas[r]);
    prev = curr;
    curr = next;
  }
  return out;
}

GmGraph::GmGraph(Tensor adjacency)
    : num_nodes_(adjacency.rank() == 2 ? adjacency.dim(0) : 0),
      adjacency_(adjacency.detach()),
      normalized_(normalize_adjacency(adjacency)) {
  const auto v = adjacency_.data();
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    if (v[i * num_nodes_ + i] != 0.0) throw ParameterError("graph adjacency must have a zero diagonal");
    for (std::size_t j = 0; j < num_nodes_; ++j) {
      const double e = v[i * num_nodes_ + j];
      if (e != 0.0 && e != 1.0) throw ParameterError("graph adjacency entries must be 0 or 1");
    }
  }
}

GmGraph GmGraph::standard() { return GmGraph(predefined_adjacency()); }

std::vector<double> GmGraph::degrees() const {
  std::vector<double> deg(num_nodes_, 0.0);
  const auto v = adjacency_.data();
  for (std::size_t i = 0; i < num_nodes_; ++i)
    for (std::size_t j = 0; j < num_nodes_; ++j) deg[i] += v[i * num_nodes_ + j];
  return deg;
}

}  // namespace gmg
