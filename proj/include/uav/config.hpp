#pragma once

#include <string>

#include <json.hpp>

#include "uav/losses.hpp"
#include "uav/masking.hpp"
#include "uav/model.hpp"
#include "uav/trainer.hpp"

namespace uav {

struct EvalConfig {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

// One experiment file with sections model/mask/loss/train/eval. Unknown keys
// are rejected by name; loss.tau and loss.lambda are mandatory so experiment
// files stay self-documenting.
struct ExperimentConfig {
  ModelConfig model;
  MaskConfig mask;
  LossConfig loss;
  TrainConfig train;
  EvalConfig eval;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

// Model section alone (checkpoint headers store the full experiment echo).
ModelConfig parse_model_config(const nlohmann::json& section);
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_checkpoint(const nlohmann::json& config_echo);

}  // namespace uav
