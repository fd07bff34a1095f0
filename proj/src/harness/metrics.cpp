#include "ugpl/harness/metrics.hpp"

#include <stdexcept>
#include <string>

namespace ugpl {

ClassificationMetrics classification_metrics(std::span<const std::size_t> predictions,
                                             std::span<const std::size_t> labels, std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw std::invalid_argument("metrics: predictions and labels differ in length");
  if (num_classes == 0) throw std::invalid_argument("metrics: num_classes must be positive");
  ClassificationMetrics m;
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw std::invalid_argument("metrics: class index out of range at position " + std::to_string(i));
    }
    ++m.confusion[labels[i]][predictions[i]];
    if (labels[i] == predictions[i]) ++correct;
  }
  m.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double tp = static_cast<double>(m.confusion[c][c]);
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(m.confusion[o][c]);
      fn += static_cast<double>(m.confusion[c][o]);
    }
    const double denom = 2.0 * tp + fp + fn;
    const double f1 = denom == 0.0 ? 1.0 : 2.0 * tp / denom;
    m.per_class_f1.push_back(f1);
    f1_sum += f1;
  }
  m.macro_f1 = f1_sum / static_cast<double>(num_classes);
  return m;
}

nlohmann::json to_json(const ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"per_class_f1", m.per_class_f1}, {"confusion", m.confusion}};
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json components{{"global", {{"accuracy", r.global.accuracy}, {"macro_f1", r.global.macro_f1}}},
                            {"fused", {{"accuracy", r.fused.accuracy}, {"macro_f1", r.fused.macro_f1}}}};
  components["local"] = r.local ? nlohmann::json{{"accuracy", r.local->accuracy}, {"macro_f1", r.local->macro_f1}}
                                : nlohmann::json(nullptr);
  return {{"accuracy", r.fused.accuracy},
          {"macro_f1", r.fused.macro_f1},
          {"per_class_f1", r.fused.per_class_f1},
          {"confusion", r.fused.confusion},
          {"per_component", components},
          {"mean_u_g", r.mean_u_g},
          {"mean_w_g", r.mean_w_g},
          {"num_samples", r.num_samples}};
}

}  // namespace ugpl
