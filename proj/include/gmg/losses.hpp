#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmg/tensor.hpp"

namespace gmg {

/// Cross-entropy of logits [c] or [B, c] against class indices, batch-mean.
Tensor me_loss(const Tensor& logits, std::span<const std::size_t> labels);

/// Multi-label soft-margin loss: -(1/K) sum_k [y log s(x) + (1-y) log s(-x)],
/// averaged over the batch. logits and targets share shape [K] or [B, K].
Tensor au_loss(const Tensor& logits, const Tensor& targets);

/// w_r = W_r^2 / sum W_r^2.
std::vector<double> normalized_aau_weights(const Tensor& weights);

/// sum_r W_r^2 L_r / sum_r W_r^2. Needs at least two layers.
Tensor aau_loss(const std::vector<Tensor>& layer_losses, const Tensor& weights);

/// sum_r L_r.
Tensor unweighted_multilayer_loss(const std::vector<Tensor>& layer_losses);

/// L_ME + beta * L_AAU. beta must be >= 0.
Tensor total_loss(const Tensor& me, const Tensor& aau, double beta);

}  // namespace gmg
