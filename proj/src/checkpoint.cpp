#include "gmg/checkpoint.hpp"

#include <fstream>

#include "gmg/errors.hpp"

namespace gmg {

using nlohmann::json;

namespace {

json bn_stats(const BatchNorm& bn) { return json{{"mean", bn.running_mean}, {"var", bn.running_var}}; }

void load_bn_stats(const json& j, BatchNorm& bn, const std::string& source) {
  auto mean = j.at("mean").get<std::vector<double>>();
  auto var = j.at("var").get<std::vector<double>>();
  if (mean.size() != bn.channels() || var.size() != bn.channels()) {
    throw ParseError(source, 0, "batch-norm statistics do not match the configured channels");
  }
  bn.running_mean = std::move(mean);
  bn.running_var = std::move(var);
}

}  // namespace

json config_to_json(const ModelConfig& cfg) {
  return json{{"mode", to_string(cfg.mode)},
              {"fusion_layer", cfg.fusion_layer},
              {"widths", cfg.widths},
              {"num_classes", cfg.num_classes},
              {"au_vocab", cfg.au_vocab},
              {"feature", to_string(cfg.feature)},
              {"stream_b", to_string(cfg.stream_b)},
              {"loss", to_string(cfg.loss)},
              {"beta", cfg.beta},
              {"learnable_adjacency", cfg.learnable_adjacency},
              {"activation", cfg.activation == Activation::relu ? "relu" : "none"},
              {"amplification", cfg.amplification}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.mode = parse_network_mode(j.at("mode").get<std::string>());
  cfg.fusion_layer = j.at("fusion_layer").get<std::size_t>();
  cfg.widths = j.at("widths").get<std::vector<std::size_t>>();
  cfg.num_classes = j.at("num_classes").get<std::size_t>();
  cfg.au_vocab = j.at("au_vocab").get<std::size_t>();
  cfg.feature = parse_feature_type(j.at("feature").get<std::string>());
  cfg.stream_b = parse_stream_b_input(j.at("stream_b").get<std::string>());
  cfg.loss = parse_loss_mode(j.at("loss").get<std::string>());
  cfg.beta = j.at("beta").get<double>();
  cfg.learnable_adjacency = j.at("learnable_adjacency").get<bool>();
  cfg.activation = j.at("activation").get<std::string>() == "none" ? Activation::none : Activation::relu;
  cfg.amplification = j.at("amplification").get<double>();
  cfg.validate();
  return cfg;
}

json checkpoint_to_json(const Model& model) {
  json tensors = json::object();
  for (const auto& [name, t] : model.parameters()) {
    tensors[name] = json{{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  json stats{{"bn_a", bn_stats(model.bn_a())}};
  if (model.config().mode == NetworkMode::gtsgn) stats["bn_b"] = bn_stats(model.bn_b());
  return json{{"format", "gmgraph-checkpoint"},
              {"version", kCheckpointVersion},
              {"config", config_to_json(model.config())},
              {"tensors", std::move(tensors)},
              {"bn_running_stats", std::move(stats)}};
}

Model model_from_checkpoint(const json& j) {
  const std::string source = "checkpoint";
  if (!j.contains("version") || j["version"] != kCheckpointVersion) {
    throw ParseError(source, 0, "unsupported checkpoint version");
  }
  Model model = Model::build(config_from_json(j.at("config")), 0);
  const json& tensors = j.at("tensors");
  auto params = model.parameters();
  if (tensors.size() != params.size()) throw ParseError(source, 0, "tensor count does not match the configuration");
  for (auto& [name, t] : params) {
    if (!tensors.contains(name)) throw ParseError(source, 0, "missing tensor '" + name + "'");
    const auto shape = tensors[name].at("shape").get<Shape>();
    auto data = tensors[name].at("data").get<std::vector<double>>();
    if (shape != t.shape() || data.size() != t.numel()) {
      throw ParseError(source, 0, "tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                                      shape_str(t.shape()));
    }
    std::copy(data.begin(), data.end(), t.data_mut().begin());
  }
  const json& stats = j.at("bn_running_stats");
  load_bn_stats(stats.at("bn_a"), model.bn_a(), source);
  if (model.config().mode == NetworkMode::gtsgn) load_bn_stats(stats.at("bn_b"), model.bn_b(), source);
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(model).dump(1) << '\n';
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace gmg
