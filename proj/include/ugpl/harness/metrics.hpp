#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace ugpl {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

// A class that is neither predicted nor present scores F1 = 1.
ClassificationMetrics classification_metrics(std::span<const std::size_t> predictions,
                                             std::span<const std::size_t> labels, std::size_t num_classes);

struct MetricsReport {
  ClassificationMetrics fused;
  ClassificationMetrics global;
  std::optional<ClassificationMetrics> local;  // absent in global_only mode
  double mean_u_g = 0.0;
  double mean_w_g = 0.0;
  std::size_t num_samples = 0;

  double accuracy() const { return fused.accuracy; }
  double macro_f1() const { return fused.macro_f1; }
};

nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const MetricsReport& r);

}  // namespace ugpl
