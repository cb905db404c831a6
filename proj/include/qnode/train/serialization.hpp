#pragma once

#include <json.hpp>

#include "qnode/lode/model.hpp"
#include "qnode/train/trainer.hpp"

namespace qnode::train {

nlohmann::json model_config_json(const lode::ModelConfig& c);
lode::ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace qnode::train
