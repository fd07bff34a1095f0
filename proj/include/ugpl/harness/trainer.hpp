#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "ugpl/harness/evaluate.hpp"

namespace ugpl {

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& detail);
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown train_loss;  // mean over the epoch's steps
  LossBreakdown val_loss;
  double val_accuracy = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::size_t steps = 0;
  double seconds = 0.0;
  std::filesystem::path checkpoint;
  std::vector<EpochRecord> history;
};

struct TrainOptions {
  std::ostream* progress = nullptr;  // one line per epoch when set
};

// Output files in `out_dir`:
//   config.json       resolved run config
//   train_log.jsonl   one record per optimizer step
//   epochs.jsonl      one record per epoch with validation loss
//   checkpoint.bin    best-validation weights
// On return `model` holds the best-validation weights.
TrainResult train(UgplModel& model, const RunConfig& config, const Dataset& dataset,
                  const std::filesystem::path& out_dir, const TrainOptions& options = {});

// Seeds the model from config.seed and trains it.
TrainResult train(const RunConfig& config, const Dataset& dataset, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

}  // namespace ugpl
