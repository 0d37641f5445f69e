#include "gmg/network.hpp"

#include <algorithm>
#include <numeric>

#include "gmg/errors.hpp"

namespace gmg {

namespace {

template <class E>
E parse_enum(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> options, const char* what) {
  for (const auto& [name, value] : options)
    if (s == name) return value;
  std::string valid;
  for (const auto& [name, value] : options) valid += (valid.empty() ? "" : ", ") + std::string(name);
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected one of: " + valid + ")");
}

void copy_values(const Tensor& from, Tensor& to) {
  std::copy(from.data().begin(), from.data().end(), to.data_mut().begin());
}

void add_module_params(std::vector<NamedTensor>& out, const std::string& prefix, const SsModule& m) {
  out.emplace_back(prefix + ".gcn.theta", m.gcn.theta);
  out.emplace_back(prefix + ".gcn.bias", m.gcn.bias);
  if (m.gcn.lam.defined()) out.emplace_back(prefix + ".gcn.lam", m.gcn.lam);
  out.emplace_back(prefix + ".tcn.kernel", m.tcn.kernel);
  out.emplace_back(prefix + ".tcn.bias", m.tcn.bias);
}

}  // namespace

std::string to_string(NetworkMode m) { return m == NetworkMode::ssgn ? "ssgn" : "gtsgn"; }

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::me: return "me";
    case LossMode::au: return "au";
    case LossMode::aau: return "aau";
  }
  return "?";
}

std::string to_string(StreamBInput s) { return s == StreamBInput::distance_angle ? "dist_angle" : "full"; }

std::string to_string(FeatureType f) {
  switch (f) {
    case FeatureType::type_a: return "a";
    case FeatureType::type_b: return "b";
    case FeatureType::distance_angle: return "dist_angle";
  }
  return "?";
}

NetworkMode parse_network_mode(std::string_view s) {
  return parse_enum<NetworkMode>(s, {{"ssgn", NetworkMode::ssgn}, {"gtsgn", NetworkMode::gtsgn}}, "mode");
}

LossMode parse_loss_mode(std::string_view s) {
  return parse_enum<LossMode>(s, {{"me", LossMode::me}, {"au", LossMode::au}, {"aau", LossMode::aau}}, "loss");
}

StreamBInput parse_stream_b_input(std::string_view s) {
  return parse_enum<StreamBInput>(
      s, {{"dist_angle", StreamBInput::distance_angle}, {"full", StreamBInput::type_b}}, "stream_b");
}

FeatureType parse_feature_type(std::string_view s) {
  return parse_enum<FeatureType>(s, {{"a", FeatureType::type_a}, {"b", FeatureType::type_b}}, "feature");
}

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::micro() {
  ModelConfig cfg;
  cfg.widths = {8, 8, 16, 16};
  cfg.num_classes = 3;
  cfg.au_vocab = 4;
  return cfg;
}

std::size_t ModelConfig::input_channels_a() const {
  return mode == NetworkMode::ssgn ? feature_channels(feature) : feature_channels(FeatureType::type_a);
}

std::size_t ModelConfig::input_channels_b() const {
  if (mode == NetworkMode::ssgn) return 0;
  return stream_b == StreamBInput::type_b ? feature_channels(FeatureType::type_b)
                                          : feature_channels(FeatureType::distance_angle);
}

std::size_t ModelConfig::first_constrained_layer() const { return mode == NetworkMode::ssgn ? 1 : fusion_layer; }

std::size_t ModelConfig::num_constrained_layers() const {
  const std::size_t first = first_constrained_layer();
  return first > num_layers() ? 0 : num_layers() - first + 1;
}

void ModelConfig::validate() const {
  if (widths.empty()) throw ConfigError("model needs at least one SS module");
  if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("layer widths must be positive");
  }
  if (num_classes < 2) throw ConfigError("need at least two ME classes");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(amplification >= 1.0)) throw ConfigError("amplification must be >= 1");
  if (mode == NetworkMode::gtsgn) {
    if (fusion_layer < 1 || fusion_layer > num_layers()) {
      throw ConfigError("fusion_layer must be in [1, " + std::to_string(num_layers()) + "], got " +
                        std::to_string(fusion_layer));
    }
    if (fusion_layer == 1 && input_channels_a() != input_channels_b()) {
      throw ConfigError("fusing at layer 1 adds the raw inputs; stream_b=full has 4 channels against 2");
    }
  }
  if (uses_au_heads() && au_vocab == 0) throw ConfigError("AU losses need au_vocab >= 1");
  if (loss == LossMode::aau && num_constrained_layers() < 2) {
    throw ConfigError("AAU loss needs N_L >= 2 constrained layers (got " + std::to_string(num_constrained_layers()) +
                      "); with a single layer it degenerates to the plain AU loss");
  }
}

// ---------------------------------------------------------------------------
// Building blocks

Linear Linear::create(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return Linear{fan_in_uniform({in, out}, in, rng), fan_in_uniform({out}, in, rng)};
}

Tensor Linear::forward(const Tensor& x) const { return matmul(x, weight) + bias; }

Tensor pool_nodes(const Tensor& h) {
  if (h.rank() == 3) return mean_axis(reshape(h, {h.dim(0) * h.dim(1), h.dim(2)}), 0);
  if (h.rank() == 4) return mean_axis(reshape(h, {h.dim(0), h.dim(1) * h.dim(2), h.dim(3)}), 1);
  throw ShapeError("pool_nodes: expected [3,N,C] or [B,3,N,C], got " + shape_str(h.shape()));
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig cfg, GmGraph graph) : cfg_(std::move(cfg)), graph_(std::move(graph)) {}

Model Model::build(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m(cfg, GmGraph::standard());
  std::mt19937_64 rng(seed);
  const std::size_t nodes = m.graph_.num_nodes();
  const bool gts = cfg.mode == NetworkMode::gtsgn;
  const std::size_t pre = gts ? cfg.fusion_layer - 1 : 0;

  m.bn_a_ = BatchNorm(cfg.input_channels_a());
  if (gts) m.bn_b_ = BatchNorm(cfg.input_channels_b());

  std::size_t in_a = cfg.input_channels_a();
  std::size_t in_b = cfg.input_channels_b();
  for (std::size_t l = 0; l < pre; ++l) {
    m.stream_a_.push_back(SsModule::create(in_a, cfg.widths[l], nodes, cfg.learnable_adjacency, rng));
    in_a = cfg.widths[l];
  }
  for (std::size_t l = 0; l < pre; ++l) {
    m.stream_b_.push_back(SsModule::create(in_b, cfg.widths[l], nodes, cfg.learnable_adjacency, rng));
    in_b = cfg.widths[l];
  }
  std::size_t in = in_a;
  for (std::size_t l = pre; l < cfg.num_layers(); ++l) {
    m.trunk_.push_back(SsModule::create(in, cfg.widths[l], nodes, cfg.learnable_adjacency, rng));
    in = cfg.widths[l];
  }
  if (cfg.uses_au_heads()) {
    const std::size_t first = cfg.first_constrained_layer() - 1;
    for (std::size_t l = first; l < cfg.num_layers(); ++l)
      m.au_heads_.push_back(Linear::create(cfg.widths[l], cfg.au_vocab, rng));
  }
  m.classifier_ = Linear::create(cfg.widths.back(), cfg.num_classes, rng);
  if (cfg.loss == LossMode::aau) m.aau_weights_ = Tensor::full({cfg.num_constrained_layers()}, 1.0, true);
  return m;
}

Model Model::clone() const {
  Model copy = build(cfg_, 0);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) copy_values(src[i].second, dst[i].second);
  copy.bn_a_.running_mean = bn_a_.running_mean;
  copy.bn_a_.running_var = bn_a_.running_var;
  copy.bn_b_.running_mean = bn_b_.running_mean;
  copy.bn_b_.running_var = bn_b_.running_var;
  return copy;
}

ForwardOutput Model::forward(const Tensor& stream_a, const Tensor& stream_b, Phase phase) {
  const bool gts = cfg_.mode == NetworkMode::gtsgn;
  auto batched = [](const Tensor& x) {
    if (x.rank() == 3) return reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
    if (x.rank() == 4) return x;
    throw ShapeError("model input must be [3,N,C] or [B,3,N,C], got " + shape_str(x.shape()));
  };
  if (gts && !stream_b.defined()) throw ShapeError("GTS-GN forward needs both feature streams");

  ForwardOutput out;
  std::size_t head = 0;
  auto record = [&](std::size_t layer, const Tensor& pooled) {
    out.hidden.push_back(pooled);
    if (!au_heads_.empty() && layer + 1 >= cfg_.first_constrained_layer()) {
      out.au_logits.push_back(au_heads_[head++].forward(pooled));
    }
  };

  Tensor h = batchnorm_forward(batched(stream_a), bn_a_, phase);
  std::size_t layer = 0;
  if (gts) {
    Tensor hb = batchnorm_forward(batched(stream_b), bn_b_, phase);
    if (h.dim(0) != hb.dim(0)) throw ShapeError("streams disagree on batch size");
    for (; layer < stream_a_.size(); ++layer) {
      h = ss_module_forward(h, graph_, stream_a_[layer], cfg_.activation);
      hb = ss_module_forward(hb, graph_, stream_b_[layer], cfg_.activation);
      // Not a constrained layer; the exported feature is what the add would see.
      record(layer, pool_nodes(h) + pool_nodes(hb));
    }
    h = h + hb;
  }
  for (const auto& module : trunk_) {
    h = ss_module_forward(h, graph_, module, cfg_.activation);
    record(layer++, pool_nodes(h));
  }
  out.me_logits = classifier_.forward(out.hidden.back());
  return out;
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("bn_a.gamma", bn_a_.gamma);
  out.emplace_back("bn_a.shift", bn_a_.shift);
  if (cfg_.mode == NetworkMode::gtsgn) {
    out.emplace_back("bn_b.gamma", bn_b_.gamma);
    out.emplace_back("bn_b.shift", bn_b_.shift);
  }
  for (std::size_t l = 0; l < stream_a_.size(); ++l)
    add_module_params(out, "stream_a.layer" + std::to_string(l + 1), stream_a_[l]);
  for (std::size_t l = 0; l < stream_b_.size(); ++l)
    add_module_params(out, "stream_b.layer" + std::to_string(l + 1), stream_b_[l]);
  for (std::size_t l = 0; l < trunk_.size(); ++l)
    add_module_params(out, "trunk.layer" + std::to_string(stream_a_.size() + l + 1), trunk_[l]);
  for (std::size_t r = 0; r < au_heads_.size(); ++r) {
    const std::string name = "au_head.layer" + std::to_string(cfg_.first_constrained_layer() + r);
    out.emplace_back(name + ".weight", au_heads_[r].weight);
    out.emplace_back(name + ".bias", au_heads_[r].bias);
  }
  out.emplace_back("classifier.weight", classifier_.weight);
  out.emplace_back("classifier.bias", classifier_.bias);
  if (aau_weights_.defined()) out.emplace_back("aau_weights", aau_weights_);
  return out;
}

std::size_t Model::count_parameters() const {
  std::size_t total = 0;
  for (const auto& [name, t] : parameters())
    if (t.requires_grad()) total += t.numel();
  return total;
}

std::vector<NamedTensor> Model::learnable_adjacencies() const {
  std::vector<NamedTensor> out;
  for (auto& [name, t] : parameters())
    if (name.ends_with(".lam")) out.emplace_back(name, t);
  return out;
}

std::vector<std::pair<std::string, std::size_t>> parameter_breakdown(const Model& model) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& [name, t] : model.parameters())
    if (t.requires_grad()) out.emplace_back(name, t.numel());
  return out;
}

}  // namespace gmg
