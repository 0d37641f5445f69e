#pragma once

// SS-GN (one stream of stacked SS modules) and GTS-GN (two streams added
// at a configurable layer), with per-layer AU heads and the classifier.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmg/geometry.hpp"
#include "gmg/graph.hpp"
#include "gmg/layers.hpp"
#include "gmg/optim.hpp"
#include "gmg/tensor.hpp"

namespace gmg {

enum class NetworkMode { ssgn, gtsgn };
enum class LossMode { me, au, aau };
/// What the second GTS-GN stream receives.
enum class StreamBInput { distance_angle, type_b };

std::string to_string(NetworkMode m);
std::string to_string(LossMode m);
std::string to_string(StreamBInput s);
std::string to_string(FeatureType f);
NetworkMode parse_network_mode(std::string_view s);
LossMode parse_loss_mode(std::string_view s);
StreamBInput parse_stream_b_input(std::string_view s);
FeatureType parse_feature_type(std::string_view s);

struct ModelConfig {
  NetworkMode mode = NetworkMode::ssgn;
  std::size_t fusion_layer = 1;                   ///< 1-based; GTS-GN only
  std::vector<std::size_t> widths{64, 64, 128, 128};  ///< output width of each SS module
  std::size_t num_classes = 6;
  std::size_t au_vocab = 12;
  FeatureType feature = FeatureType::type_a;  ///< SS-GN input
  StreamBInput stream_b = StreamBInput::distance_angle;
  LossMode loss = LossMode::aau;
  double beta = 1.0;
  bool learnable_adjacency = true;
  Activation activation = Activation::relu;
  double amplification = 3.0;  ///< landmark motion magnification applied to inputs

  /// Widths 8-8-16-16, three classes, four AUs.
  static ModelConfig micro();

  std::size_t num_layers() const { return widths.size(); }
  std::size_t input_channels_a() const;
  std::size_t input_channels_b() const;
  /// Layers whose pooled features feed an AU head: all layers for SS-GN,
  /// fusion layer through the last for GTS-GN.
  std::size_t num_constrained_layers() const;
  std::size_t first_constrained_layer() const;
  bool uses_au_heads() const { return loss != LossMode::me; }

  /// Throws ConfigError on any inconsistency (AAU with a single
  /// constrained layer, fusion layer out of range, ...).
  void validate() const;
};

struct Linear {
  Tensor weight;  ///< [in, out]
  Tensor bias;    ///< [out]

  static Linear create(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct ForwardOutput {
  Tensor me_logits;                ///< [B, c]
  std::vector<Tensor> au_logits;   ///< one [B, K] per constrained layer
  std::vector<Tensor> hidden;      ///< node-pooled [B, C_l] per layer
};

/// Mean over frames and nodes: [3,N,C] -> [C], [B,3,N,C] -> [B,C].
Tensor pool_nodes(const Tensor& h);

class Model {
 public:
  static Model build(const ModelConfig& cfg, std::uint64_t seed);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Independent deep copy.
  Model clone() const;

  /// Inputs are [3,N,C] or [B,3,N,C]; stream_b must be defined for GTS-GN.
  ForwardOutput forward(const Tensor& stream_a, const Tensor& stream_b, Phase phase);

  std::vector<NamedTensor> parameters() const;
  std::size_t count_parameters() const;

  const ModelConfig& config() const noexcept { return cfg_; }
  const GmGraph& graph() const noexcept { return graph_; }

  /// Learnable adjacency per layer, named like the owning parameter.
  std::vector<NamedTensor> learnable_adjacencies() const;
  const Tensor& aau_weights() const noexcept { return aau_weights_; }

  BatchNorm& bn_a() noexcept { return bn_a_; }
  BatchNorm& bn_b() noexcept { return bn_b_; }
  const BatchNorm& bn_a() const noexcept { return bn_a_; }
  const BatchNorm& bn_b() const noexcept { return bn_b_; }

 private:
  Model(ModelConfig cfg, GmGraph graph);

  ModelConfig cfg_;
  GmGraph graph_;
  BatchNorm bn_a_;
  BatchNorm bn_b_;
  std::vector<SsModule> stream_a_;  ///< GTS-GN pre-fusion layers
  std::vector<SsModule> stream_b_;
  std::vector<SsModule> trunk_;     ///< remaining layers (all of them for SS-GN)
  std::vector<Linear> au_heads_;
  Linear classifier_;
  Tensor aau_weights_;
};

/// Per-layer parameter counts, in the order of Model::parameters().
std::vector<std::pair<std::string, std::size_t>> parameter_breakdown(const Model& model);

}  // namespace gmg
