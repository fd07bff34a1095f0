#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ugpl/data/synthetic.hpp"

namespace ugpl {

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct Dataset {
  std::vector<Sample> samples;  // images kept in [0, 1]
  std::vector<std::string> class_names;
  SplitIndices splits;
  NormalizationStats stats;  // from the training split
  std::uint64_t seed = 0;
  nlohmann::json generator;  // generator settings, null when unknown

  std::size_t num_classes() const { return class_names.size(); }
  const std::vector<std::size_t>& indices(Split split) const;
};

// Per-class shuffle, round-robin interleave of the classes, then cut at
// round(train_fraction N) and round(val_fraction N). Class counts in every
// split differ by at most one from exact stratification.
SplitIndices stratified_split(const std::vector<std::size_t>& labels, std::size_t num_classes, std::uint64_t seed,
                              double train_fraction = 0.6, double val_fraction = 0.2);

// Pixel mean and population std over the given samples (std floored at 1e-8).
NormalizationStats compute_stats(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

// (x - mean) / std elementwise.
Tensor normalize(const Tensor& image, const NormalizationStats& stats);

// Synthesizes, splits and computes statistics.
Dataset make_synthetic_dataset(const SyntheticConfig& config);

// Writes images/<id>.pgm, labels.csv (id,filename,label) and meta.json.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Collects every problem found while loading.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::filesystem::path& dir, std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct LoadOptions {
  // Resize target; defaults to the stored image size.
  std::optional<std::size_t> height;
  std::optional<std::size_t> width;
};

// Reads a dataset directory. Splits come from meta.json when present and are
// otherwise recomputed from its seed. Normalization statistics are always
// recomputed over the loaded training split.
Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

}  // namespace ugpl
