#include "gmg/layers.hpp"

#include <cmath>

#include "gmg/errors.hpp"

namespace gmg {

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

GcnLayer GcnLayer::create(std::size_t in, std::size_t out, std::size_t nodes, bool learnable_adjacency,
                          std::mt19937_64& rng) {
  GcnLayer layer;
  layer.theta = fan_in_uniform({in, out}, in, rng);
  layer.bias = fan_in_uniform({out}, in, rng);
  if (learnable_adjacency) layer.lam = Tensor::zeros({nodes, nodes}, true);
  return layer;
}

TcnLayer TcnLayer::create(std::size_t channels, std::mt19937_64& rng) {
  const std::size_t fan_in = kTemporalTaps * channels;
  return TcnLayer{fan_in_uniform({kTemporalTaps, channels, channels}, fan_in, rng),
                  fan_in_uniform({channels}, fan_in, rng)};
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)),
      shift(Tensor::zeros({channels}, true)),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {}

SsModule SsModule::create(std::size_t in, std::size_t out, std::size_t nodes, bool learnable_adjacency,
                          std::mt19937_64& rng) {
  SsModule m;
  m.gcn = GcnLayer::create(in, out, nodes, learnable_adjacency, rng);
  m.tcn = TcnLayer::create(out, rng);
  return m;
}

Tensor gcn_forward(const Tensor& x, const GmGraph& graph, const GcnLayer& layer, Activation act) {
  const bool batched = x.rank() == 3;
  if ((x.rank() != 2 && !batched) || x.dim(batched ? 1 : 0) != graph.num_nodes() ||
      x.shape().back() != layer.theta.dim(0)) {
    throw ShapeError("gcn_forward: input " + shape_str(x.shape()) + " does not fit " +
                     std::to_string(graph.num_nodes()) + " nodes and theta " + shape_str(layer.theta.shape()));
  }
  const Tensor& op = layer.lam.defined() ? graph.normalized() + layer.lam : graph.normalized();
  const Tensor mixed = node_mix(op, x);
  const std::size_t rows = x.numel() / x.shape().back();
  const Tensor flat = matmul(reshape(mixed, {rows, x.shape().back()}), layer.theta) + layer.bias;
  Shape out_shape = x.shape();
  out_shape.back() = layer.theta.dim(1);
  Tensor y = reshape(flat, std::move(out_shape));
  return act == Activation::relu ? relu(y) : y;
}

Tensor tcn_forward(const Tensor& y, const TcnLayer& layer) {
  const bool batched = y.rank() == 4;
  if ((y.rank() != 3 && !batched) || y.dim(batched ? 1 : 0) != kTemporalTaps) {
    throw ShapeError("tcn_forward: expected [3,N,C] or [B,3,N,C], got " + shape_str(y.shape()));
  }
  const Tensor in = batched ? y : reshape(y, {1, y.dim(0), y.dim(1), y.dim(2)});
  Tensor out = temporal_conv(in, layer.kernel, 1) + layer.bias;
  if (!batched) out = reshape(out, {out.dim(1), out.dim(2), out.dim(3)});
  return out;
}

Tensor ss_module_forward(const Tensor& x, const GmGraph& graph, const SsModule& module, Activation act) {
  const bool batched = x.rank() == 4;
  if ((x.rank() != 3 && !batched) || x.dim(batched ? 1 : 0) != kTemporalTaps) {
    throw ShapeError("ss_module_forward: expected [3,N,C] or [B,3,N,C], got " + shape_str(x.shape()));
  }
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t nodes = x.dim(batched ? 2 : 1);
  const std::size_t cin = x.shape().back();
  // Frames become independent graphs sharing theta and A_L.
  const Tensor frames = reshape(x, {batch * kTemporalTaps, nodes, cin});
  const Tensor spatial = gcn_forward(frames, graph, module.gcn, act);
  const Tensor stacked = reshape(spatial, {batch, kTemporalTaps, nodes, module.out_channels()});
  Tensor out = tcn_forward(stacked, module.tcn);
  if (!batched) out = reshape(out, {kTemporalTaps, nodes, module.out_channels()});
  return out;
}

Tensor batchnorm_forward(const Tensor& x, BatchNorm& bn, Phase phase) {
  const std::size_t c = bn.channels();
  if (x.rank() == 0 || x.shape().back() != c) {
    throw ShapeError("batchnorm: input " + shape_str(x.shape()) + " does not have " + std::to_string(c) + " channels");
  }
  const std::size_t rows = x.numel() / c;
  if (rows == 0) throw ShapeError("batchnorm: empty batch");
  const Tensor flat = reshape(x, {rows, c});

  Tensor normalized;
  if (phase == Phase::train) {
    const Tensor mu = mean_axis(flat, 0);
    const Tensor centered = flat - mu;
    const Tensor var = mean_axis(square(centered), 0);
    normalized = centered / sqrt(add_scalar(var, bn.eps));

    const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
    for (std::size_t k = 0; k < c; ++k) {
      bn.running_mean[k] = (1.0 - bn.momentum) * bn.running_mean[k] + bn.momentum * mu.data()[k];
      bn.running_var[k] = (1.0 - bn.momentum) * bn.running_var[k] + bn.momentum * var.data()[k] * unbias;
    }
  } else {
    std::vector<double> inv_std(c);
    for (std::size_t k = 0; k < c; ++k) inv_std[k] = 1.0 / std::sqrt(bn.running_var[k] + bn.eps);
    normalized = (flat - Tensor::from({c}, bn.running_mean)) * Tensor::from({c}, std::move(inv_std));
  }
  return reshape(normalized * bn.gamma + bn.shift, x.shape());
}

}  // namespace gmg
