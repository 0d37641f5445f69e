#pragma once

// Graph convolution with a learnable adjacency, the 3-tap temporal
// convolution, batch normalization, and their spatial-temporal (SS) block.

#include <cstddef>
#include <random>
#include <vector>

#include "gmg/graph.hpp"
#include "gmg/tensor.hpp"

namespace gmg {

enum class Activation { relu, none };
enum class Phase { train, eval };

inline constexpr std::size_t kTemporalTaps = 3;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) leaf parameter.
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

struct GcnLayer {
  Tensor theta;  ///< [C_in, C_out]
  Tensor bias;   ///< [C_out]
  Tensor lam;    ///< [N, N] learnable adjacency, zero at init; undefined = fixed graph only

  static GcnLayer create(std::size_t in, std::size_t out, std::size_t nodes, bool learnable_adjacency,
                         std::mt19937_64& rng);
};

struct TcnLayer {
  Tensor kernel;  ///< [3, C, C]
  Tensor bias;    ///< [C]

  static TcnLayer create(std::size_t channels, std::mt19937_64& rng);
};

struct BatchNorm {
  explicit BatchNorm(std::size_t channels = 0);

  Tensor gamma;
  Tensor shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  std::size_t channels() const { return running_mean.size(); }
};

struct SsModule {
  GcnLayer gcn;
  TcnLayer tcn;

  static SsModule create(std::size_t in, std::size_t out, std::size_t nodes, bool learnable_adjacency,
                         std::mt19937_64& rng);
  std::size_t out_channels() const { return gcn.theta.dim(1); }
};

/// (L + A_L) X theta + bias for one frame [N, C_in] or a stack [G, N, C_in].
Tensor gcn_forward(const Tensor& x, const GmGraph& graph, const GcnLayer& layer, Activation act = Activation::relu);

/// Per-node temporal conv over [3, N, C] or [B, 3, N, C]; zero padding 1
/// keeps T = 3.
Tensor tcn_forward(const Tensor& y, const TcnLayer& layer);

/// GCN (shared theta and A_L) on each of the three frames, then TCN.
Tensor ss_module_forward(const Tensor& x, const GmGraph& graph, const SsModule& module,
                         Activation act = Activation::relu);

/// Normalizes the last axis over all leading positions. Running statistics
/// move only in Phase::train.
Tensor batchnorm_forward(const Tensor& x, BatchNorm& bn, Phase phase);

}  // namespace gmg
