#pragma once

#include <cstddef>
#include <span>

#include "ugpl/evidential.hpp"
#include "ugpl/numerics/autograd.hpp"

namespace ugpl {

struct LossWeights {
  double fused = 1.0;
  double global = 0.5;
  double local = 0.5;
  double uncertainty = 0.3;
  double consistency = 0.2;
  double confidence = 0.1;
  double diversity = 0.1;

  static LossWeights baseline() { return {}; }
  static LossWeights uncertainty_focus() {
    LossWeights w;
    w.uncertainty = 0.6;
    return w;
  }
  static LossWeights zero() { return {0, 0, 0, 0, 0, 0, 0}; }

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double fused = 0.0;
  double global = 0.0;
  double local = 0.0;
  double uncertainty = 0.0;
  double consistency = 0.0;
  double confidence = 0.0;
  double diversity = 0.0;
  double total = 0.0;
  LossWeights weights;

  // Sum of weight * component in a fixed order.
  double weighted_sum() const;
};

// Scalar loss Vars; an undefined Var counts as a zero component.
struct LossTerms {
  Var fused;
  Var global;
  Var local;
  Var uncertainty;
  Var consistency;
  Var confidence;
  Var diversity;
};

struct TotalLoss {
  Var total;
  LossBreakdown breakdown;
};

// All losses below average over the batch. Labels are one per sample.

// logits: [B, C] (or [C] with a single label).
Var ce_loss(const Var& logits, std::span<const std::size_t> labels);
// patch_logits: [B, K, C]; plain mean over samples and patches.
Var local_ce_loss(const Var& patch_logits, std::span<const std::size_t> labels);

// Binary [B, h, w] map: 1 where argmax_c alpha/S matches the label.
// alpha: [B, h, w, C]. Ties go to the lowest class index.
Tensor correctness_map(const DirichletParams& params, std::span<const std::size_t> labels);

// MSE(normalized, 1 - cmap); both [B, h, w].
Var uncertainty_loss(const Var& normalized, const Tensor& cmap);

// mean_k c_k KL(softmax(z_lk) || softmax(z_g)). patch_logits: [B, K, C],
// confidences: [B, K], global_logits: [B, C].
Var consistency_loss(const Var& patch_logits, const Var& confidences, const Var& global_logits);

// mean_k (c_k - a_k)^2 with a_k = [argmax z_lk == label].
Var confidence_loss(const Var& confidences, const Var& patch_logits, std::span<const std::size_t> labels);

// Mean pairwise cosine similarity of patch softmax vectors; 0 when K < 2.
Var diversity_loss(const Var& patch_logits);

// Weighted sum. Components with weight 0 are left out of the graph.
TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace ugpl
