#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "gmg/network.hpp"

namespace gmg {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

/// {version, config, tensors: {name: {shape, data}}, bn_running_stats}.
nlohmann::json checkpoint_to_json(const Model& model);
/// Throws ParseError (line 0) on version or tensor-shape mismatch.
Model model_from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gmg
