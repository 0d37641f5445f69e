#include "gmg/losses.hpp"

#include <string>

#include "gmg/errors.hpp"

namespace gmg {

namespace {

Tensor stack_scalars(const std::vector<Tensor>& xs) {
  std::vector<Tensor> parts;
  parts.reserve(xs.size());
  for (const auto& x : xs) {
    if (x.numel() != 1) throw ShapeError("layer loss must be a scalar, got " + shape_str(x.shape()));
    parts.push_back(reshape(x, {1}));
  }
  return concat(parts, 0);
}

}  // namespace

Tensor me_loss(const Tensor& logits, std::span<const std::size_t> labels) {
  const bool batched = logits.rank() == 2;
  if (logits.rank() != 1 && !batched) throw ShapeError("me_loss: logits must be [c] or [B,c]");
  const std::size_t batch = batched ? logits.dim(0) : 1;
  const std::size_t classes = logits.shape().back();
  if (labels.size() != batch) {
    throw ShapeError("me_loss: " + std::to_string(labels.size()) + " labels for batch of " + std::to_string(batch));
  }
  std::vector<double> onehot(batch * classes, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) {
      throw ParameterError("me_loss: label " + std::to_string(labels[b]) + " out of range for " +
                           std::to_string(classes) + " classes");
    }
    onehot[b * classes + labels[b]] = 1.0;
  }
  const Tensor picked = sum(log_softmax(logits) * Tensor::from(logits.shape(), std::move(onehot)));
  return scale(picked, -1.0 / static_cast<double>(batch));
}

Tensor au_loss(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape() || logits.rank() == 0 || logits.rank() > 2) {
    throw ShapeError("au_loss: logits " + shape_str(logits.shape()) + " vs targets " + shape_str(targets.shape()));
  }
  for (double y : targets.data())
    if (y != 0.0 && y != 1.0) throw ParameterError("au_loss: targets must be 0/1");
  // -log s(x) = softplus(-x), -log s(-x) = softplus(x).
  const Tensor y = targets.detach();
  const Tensor one_minus_y = add_scalar(scale(y, -1.0), 1.0);
  const Tensor per_label = y * softplus(neg(logits)) + one_minus_y * softplus(logits);
  return mean(per_label);
}

std::vector<double> normalized_aau_weights(const Tensor& weights) {
  const auto w = weights.data();
  double total = 0.0;
  for (double v : w) total += v * v;
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] * w[i] / total;
  return out;
}

Tensor aau_loss(const std::vector<Tensor>& layer_losses, const Tensor& weights) {
  if (layer_losses.size() < 2) {
    throw ConfigError("AAU loss needs at least two constrained layers; with one it is the plain AU loss");
  }
  if (weights.rank() != 1 || weights.numel() != layer_losses.size()) {
    throw ShapeError("aau_loss: weights " + shape_str(weights.shape()) + " for " +
                     std::to_string(layer_losses.size()) + " layer losses");
  }
  const Tensor w2 = square(weights);
  const Tensor denom = sum(w2);
  if (denom.item() < 1e-12) throw NumericError("aau_loss: sum of squared weights below 1e-12");
  return sum(w2 * stack_scalars(layer_losses)) / denom;
}

Tensor unweighted_multilayer_loss(const std::vector<Tensor>& layer_losses) {
  if (layer_losses.empty()) throw ConfigError("multi-layer AU loss needs at least one layer");
  return sum(stack_scalars(layer_losses));
}

Tensor total_loss(const Tensor& me, const Tensor& aau, double beta) {
  if (!(beta >= 0.0)) throw ParameterError("beta must be >= 0, got " + std::to_string(beta));
  return me + scale(aau, beta);
}

}  // namespace gmg
