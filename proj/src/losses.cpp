#include "ugpl/losses.hpp"

#include <array>
#include <stdexcept>
#include <string>

#include "ugpl/numerics/ops.hpp"

namespace ugpl {
namespace {

void check_labels(std::span<const std::size_t> labels, std::size_t batch, std::size_t classes, const char* op) {
  if (labels.size() != batch) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(labels.size()) + " labels for batch of " +
                                std::to_string(batch));
  }
  for (std::size_t label : labels) {
    if (label >= classes) {
      throw std::invalid_argument(std::string(op) + ": label " + std::to_string(label) + " out of range for " +
                                  std::to_string(classes) + " classes");
    }
  }
}

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

// -mean(sum(onehot * log_softmax)) over rows of [rows, C].
Var mean_nll(const Var& logits2d, std::span<const std::size_t> row_labels) {
  const std::size_t rows = logits2d.shape()[0];
  const std::size_t classes = logits2d.shape()[1];
  Tensor onehot(Shape{rows, classes}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) onehot[r * classes + row_labels[r]] = 1.0;
  Var picked = ops::sum(ops::mul(ops::log_softmax(logits2d), ops::constant(std::move(onehot))));
  return ops::scale(picked, -1.0 / static_cast<double>(rows));
}

Var or_zero(const Var& v) { return v.defined() ? v : ops::constant(Tensor::scalar(0.0)); }

void check_patch_shapes(const Var& patch_logits, const char* op) {
  if (patch_logits.shape().size() != 3 || patch_logits.shape()[1] == 0) {
    throw ShapeError(op, "patch logits must be [B, K, C] with K >= 1, got " + shape_str(patch_logits.shape()));
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {fused, global, local, uncertainty, consistency, confidence, diversity}) {
    if (!(w >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  }
}

double LossBreakdown::weighted_sum() const {
  const std::array<double, 7> c{fused, global, local, uncertainty, consistency, confidence, diversity};
  const std::array<double, 7> w{weights.fused,       weights.global,     weights.local,    weights.uncertainty,
                                weights.consistency, weights.confidence, weights.diversity};
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) total += w[i] * c[i];
  return total;
}

Var ce_loss(const Var& logits, std::span<const std::size_t> labels) {
  Var z = logits;
  if (z.shape().size() == 1) z = ops::reshape(z, Shape{1, z.shape()[0]});
  if (z.shape().size() != 2) throw ShapeError("ce_loss", "expected [B, C], got " + shape_str(logits.shape()));
  check_labels(labels, z.shape()[0], z.shape()[1], "ce_loss");
  return mean_nll(z, labels);
}

Var local_ce_loss(const Var& patch_logits, std::span<const std::size_t> labels) {
  check_patch_shapes(patch_logits, "local_ce_loss");
  const std::size_t batch = patch_logits.shape()[0];
  const std::size_t k = patch_logits.shape()[1];
  const std::size_t classes = patch_logits.shape()[2];
  check_labels(labels, batch, classes, "local_ce_loss");
  std::vector<std::size_t> rows(batch * k);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < k; ++j) rows[b * k + j] = labels[b];
  }
  return mean_nll(ops::reshape(patch_logits, Shape{batch * k, classes}), rows);
}

Tensor correctness_map(const DirichletParams& params, std::span<const std::size_t> labels) {
  const Tensor probs = expected_probabilities(params).value();
  const Shape& s = probs.shape();
  if (s.size() != 4) throw ShapeError("correctness_map", "expected alpha [B, h, w, C], got " + shape_str(s));
  check_labels(labels, s[0], s[3], "correctness_map");
  const std::size_t classes = s[3];
  const std::size_t per_sample = s[1] * s[2];
  Tensor out(Shape{s[0], s[1], s[2]}, 0.0);
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t i = 0; i < per_sample; ++i) {
      const std::size_t pix = b * per_sample + i;
      out[pix] = argmax_row(probs.data().data() + pix * classes, classes) == labels[b] ? 1.0 : 0.0;
    }
  }
  return out;
}

Var uncertainty_loss(const Var& normalized, const Tensor& cmap) {
  if (normalized.shape() != cmap.shape()) throw ShapeError("uncertainty_loss", normalized.shape(), cmap.shape());
  Tensor target(cmap.shape());
  for (std::size_t i = 0; i < cmap.size(); ++i) target[i] = 1.0 - cmap[i];
  return ops::mse(normalized, ops::constant(std::move(target)));
}

Var consistency_loss(const Var& patch_logits, const Var& confidences, const Var& global_logits) {
  check_patch_shapes(patch_logits, "consistency_loss");
  const std::size_t batch = patch_logits.shape()[0];
  const std::size_t k = patch_logits.shape()[1];
  const std::size_t classes = patch_logits.shape()[2];
  if (global_logits.shape() != Shape{batch, classes}) {
    throw ShapeError("consistency_loss", global_logits.shape(), Shape{batch, classes});
  }
  if (confidences.shape() != Shape{batch, k}) throw ShapeError("consistency_loss", confidences.shape(), Shape{batch, k});
  Var log_p = ops::log_softmax(patch_logits);
  Var p = ops::softmax(patch_logits);
  Var log_q = ops::reshape(ops::log_softmax(global_logits), Shape{batch, 1, classes});
  Var kl = ops::sum(ops::mul(p, ops::sub(log_p, log_q)), 2);
  return ops::mean(ops::mul(kl, confidences));
}

Var confidence_loss(const Var& confidences, const Var& patch_logits, std::span<const std::size_t> labels) {
  check_patch_shapes(patch_logits, "confidence_loss");
  const std::size_t batch = patch_logits.shape()[0];
  const std::size_t k = patch_logits.shape()[1];
  const std::size_t classes = patch_logits.shape()[2];
  if (confidences.shape() != Shape{batch, k}) throw ShapeError("confidence_loss", confidences.shape(), Shape{batch, k});
  check_labels(labels, batch, classes, "confidence_loss");
  const Tensor& z = patch_logits.value();
  Tensor correct(Shape{batch, k}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < k; ++j) {
      correct[b * k + j] = argmax_row(z.data().data() + (b * k + j) * classes, classes) == labels[b] ? 1.0 : 0.0;
    }
  }
  return ops::mse(confidences, ops::constant(std::move(correct)));
}

Var diversity_loss(const Var& patch_logits) {
  check_patch_shapes(patch_logits, "diversity_loss");
  const std::size_t k = patch_logits.shape()[1];
  if (k < 2) return ops::constant(Tensor::scalar(0.0));
  Var p = ops::softmax(patch_logits);
  Var unit = ops::div(p, ops::sqrt(ops::sum(ops::square(p), 2, true)));
  std::vector<Var> rows;
  for (std::size_t j = 0; j < k; ++j) rows.push_back(ops::slice(unit, 1, j, j + 1));
  std::vector<Var> cosines;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) cosines.push_back(ops::sum(ops::mul(rows[i], rows[j]), 2));
  }
  return ops::mean(ops::concat(cosines, 1));
}

TotalLoss total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  TotalLoss out;
  LossBreakdown& b = out.breakdown;
  b.weights = weights;
  const std::array<std::pair<const Var*, double>, 7> parts{{{&terms.fused, weights.fused},
                                                            {&terms.global, weights.global},
                                                            {&terms.local, weights.local},
                                                            {&terms.uncertainty, weights.uncertainty},
                                                            {&terms.consistency, weights.consistency},
                                                            {&terms.confidence, weights.confidence},
                                                            {&terms.diversity, weights.diversity}}};
  const std::array<double*, 7> slots{&b.fused, &b.global, &b.local, &b.uncertainty,
                                     &b.consistency, &b.confidence, &b.diversity};
  Var total = ops::constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Var component = or_zero(*parts[i].first);
    if (component.size() != 1) throw ShapeError("total_loss", "loss components must be scalars");
    *slots[i] = component.item();
    if (parts[i].second == 0.0) continue;
    total = ops::add(total, ops::scale(component, parts[i].second));
  }
  out.total = total;
  b.total = total.item();
  return out;
}

}  // namespace ugpl
