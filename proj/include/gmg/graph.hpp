#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gmg/tensor.hpp"

namespace gmg {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected edges of the 14-node face graph: brow, nose and mouth chains
/// plus inner-brow, brow-to-nose and nose-to-lip bridges.
const std::vector<Edge>& predefined_edges();

/// Symmetric 0/1 matrix for an edge list.
Tensor adjacency_from_edges(std::size_t num_nodes, std::span<const Edge> edges);

/// The fixed [14,14] adjacency for predefined_edges().
Tensor predefined_adjacency();

/// I + D^{-1/2} A D^{-1/2}. Zero-degree nodes keep only the identity row.
/// Throws ParameterError for non-square, asymmetric or negative input.
Tensor normalize_adjacency(const Tensor& adjacency);

/// Reference Chebyshev spectral filter sum_r theta_r C_r(L~) X with
/// L~ = 2 (I - D^{-1/2} A D^{-1/2}) / lambda_max - I and R = thetas.size() - 1.
/// Used as an oracle; the network uses the first-order closed form.
Tensor chebyshev_filter(const Tensor& x, const Tensor& adjacency, std::span<const double> thetas,
                        double lambda_max);

/// Fixed spatial graph shared by every frame and layer.
class GmGraph {
 public:
  explicit GmGraph(Tensor adjacency);

  static GmGraph standard();

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  const Tensor& adjacency() const noexcept { return adjacency_; }
  /// L = I + D^{-1/2} A D^{-1/2}.
  const Tensor& normalized() const noexcept { return normalized_; }
  std::vector<double> degrees() const;

 private:
  std::size_t num_nodes_;
  Tensor adjacency_;
  Tensor normalized_;
};

}  // namespace gmg
