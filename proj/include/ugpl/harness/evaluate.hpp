#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ugpl/data/dataset.hpp"
#include "ugpl/harness/config.hpp"
#include "ugpl/harness/metrics.hpp"

namespace ugpl {

// Deterministic per-sample seed for patch fallback draws and the no_ug map.
std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& purpose, std::size_t epoch, std::size_t index);

// Stacks normalized images of `indices` into [B, H, W, 1].
Tensor make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                  const NormalizationStats& stats);

struct SampleRecord {
  std::string id;
  std::size_t label = 0;
  std::size_t global_pred = 0;
  std::optional<std::size_t> local_pred;
  std::size_t fused_pred = 0;
  double u_g = 0.0;
  double w_g = 0.0;
  std::vector<double> fused_scores;  // softmax of fused logits
};

struct Evaluation {
  MetricsReport report;
  LossBreakdown mean_loss;  // sample-weighted mean of batch losses
  std::vector<SampleRecord> rows;
};

// Eval-mode pass over a split in fixed batches.
Evaluation evaluate_model(UgplModel& model, const RunConfig& config, const Dataset& dataset, Split split);

// Builds a model from `config`, loads the checkpoint and evaluates. Throws
// std::invalid_argument when the dataset's class count differs from the model's.
Evaluation evaluate_checkpoint(const std::filesystem::path& checkpoint, const RunConfig& config,
                               const Dataset& dataset, Split split);

void write_metrics_json(const std::filesystem::path& path, const Evaluation& evaluation, Split split);
// id,label,global_pred,local_pred,fused_pred,u_g,w_g,score_<class>...
void write_predictions_csv(const std::filesystem::path& path, const Evaluation& evaluation,
                           const std::vector<std::string>& class_names);

nlohmann::json to_json(const LossBreakdown& b);

}  // namespace ugpl
