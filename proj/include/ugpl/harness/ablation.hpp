#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ugpl/harness/trainer.hpp"

namespace ugpl {

struct AblationRow {
  std::string name;
  AblationMode mode = AblationMode::kFull;
  std::size_t patch_size = 0;
  std::size_t num_patches = 0;
  MetricsReport test;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double best_val_loss = 0.0;
  double train_seconds = 0.0;
};

struct AblationOptions {
  bool sweep = false;  // full mode over P in {8, 16, 24} x K in {2, 3, 4}
  bool modes = true;   // the four ablation modes at the base patch setting
  std::ostream* progress = nullptr;
};

// Trains one run per row under out_dir/<row name>/ and evaluates it on the
// test split. Writes out_dir/ablation.json and out_dir/ablation.csv.
std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& dataset, const std::filesystem::path& out_dir,
                                      const AblationOptions& options = {});

void write_ablation_report(const std::filesystem::path& out_dir, const std::vector<AblationRow>& rows);

}  // namespace ugpl
