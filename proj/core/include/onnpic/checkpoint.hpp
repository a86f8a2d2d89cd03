#pragma once

#include <string>
#include <vector>

#include "onnpic/codec.hpp"

namespace onnpic {

// Checkpoint container, little-endian:
//   magic "ONNM" | u32 version | u32 json_len | config json |
//   u32 n_params | per param: u32 name_len, name, u32 shape[4],
//   f64 data[numel] | u32 crc32 of all prior bytes
inline constexpr uint32_t kCheckpointVersion = 1;

std::vector<uint8_t> serialize_checkpoint(const Model& model,
                                          const std::string& config_json);
void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& config_json);

struct LoadedCheckpoint {
  ModelConfig config;
  std::string config_json;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

LoadedCheckpoint read_checkpoint(const std::string& path);
// Rebuilds the model from the config echo and fills the parameters by name.
Model load_model(const std::string& path, std::string* config_json = nullptr);

// Config <-> JSON for the echo (also used by the CLI's --config files).
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace onnpic
