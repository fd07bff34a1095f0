#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ugpl/data/augment.hpp"
#include "ugpl/losses.hpp"
#include "ugpl/model/ugpl_model.hpp"
#include "ugpl/nn/adam.hpp"

namespace ugpl {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OptimizerConfig {
  std::string kind = "adam";
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  nn::AdamOptions adam() const { return {lr, beta1, beta2, eps, weight_decay}; }
};

struct RunConfig {
  UgplConfig model;
  LossWeights loss_weights;
  OptimizerConfig optimizer;
  std::string schedule = "cosine";
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t early_stopping_patience = 7;
  std::uint64_t seed = 0;
  AblationMode ablation = AblationMode::kFull;
  AugmentConfig augment;
  bool deterministic = true;

  // Throws ConfigError on any violated invariant.
  void validate() const;
};

// Strict parse: every key is optional, unknown keys are errors.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// Applies UGPL_SEED when set. Returns true if the seed was overridden.
bool apply_env_overrides(RunConfig& config);

// lr0 (1 + cos(pi epoch / total)) / 2
double cosine_lr(double lr0, std::size_t epoch, std::size_t total_epochs);

}  // namespace ugpl
