#pragma once

#include <map>
#include <string>

#include "gnnir/autodiff.hpp"
#include "gnnir/model.hpp"

namespace gnnir {

// Versioned little-endian binary: magic, a JSON model-config header, then
// named raw float64 tensors in registration order.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params);

struct Checkpoint {
    ModelConfig config;
    std::map<std::string, Tensor> params;
};

Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model from the stored config and restores every parameter.
Model load_model(const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace gnnir
