#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "masaat/model.hpp"

namespace masaat::model {

inline constexpr const char* kCheckpointFormat = "masaat-policy";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json encoder_config_to_json(const nn::EncoderConfig& cfg);
nn::EncoderConfig encoder_config_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path);

// JSON container: format tag, version, model config, named parameter tensors.
// Doubles are written in shortest round-trip form, so save/load is bit-exact.
std::string checkpoint_to_string(const MasaatPolicy& policy);
MasaatPolicy checkpoint_from_string(const std::string& text);
void save_checkpoint(const MasaatPolicy& policy, const std::filesystem::path& path);
MasaatPolicy load_checkpoint(const std::filesystem::path& path);

}  // namespace masaat::model
