#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ugpl/losses.hpp"
#include "ugpl/numerics/ops.hpp"
#include "ugpl/numerics/rng.hpp"

using namespace ugpl;

namespace {

Var var(Shape s, std::vector<double> v, bool grad = false) { return Var(Tensor(std::move(s), std::move(v)), grad); }

// Patch logits whose softmax is (numerically) a one-hot on `hot`.
Var one_hot_logits(const std::vector<std::size_t>& hot, std::size_t classes) {
  std::vector<double> v(hot.size() * classes, -50.0);
  for (std::size_t k = 0; k < hot.size(); ++k) v[k * classes + hot[k]] = 50.0;
  return var(Shape{1, hot.size(), classes}, v);
}

DirichletParams params_with_alpha(Shape s, std::vector<double> alpha) {
  DirichletParams p;
  p.alpha = var(std::move(s), std::move(alpha));
  return p;
}

LossTerms all_ones() {
  const Var one = var(Shape{}, {1.0});
  return {one, one, one, one, one, one, one};
}

}  // namespace

TEST(CeLoss, ClosedForms) {
  const std::vector<std::size_t> zero{0};
  EXPECT_NEAR(ce_loss(var(Shape{2}, {0.0, 0.0}), zero).item(), 0.6931, 1e-4);
  EXPECT_NEAR(ce_loss(var(Shape{2}, {50.0, -50.0}), zero).item(), 0.0, 1e-12);
  EXPECT_NEAR(ce_loss(var(Shape{2}, {1.0, 0.0}), zero).item(), 0.3133, 1e-4);
  EXPECT_NEAR(ce_loss(var(Shape{2}, {1.0, 0.0}), zero).item(), -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-14);
}

TEST(CeLoss, BatchMeanAndErrors) {
  const std::vector<std::size_t> labels{0, 1};
  const double v = ce_loss(var(Shape{2, 2}, {1.0, 0.0, 0.0, 0.0}), labels).item();
  EXPECT_NEAR(v, 0.5 * (0.31326168751822286 + std::log(2.0)), 1e-12);
  const std::vector<std::size_t> bad{2};
  EXPECT_THROW(ce_loss(var(Shape{2}, {0.0, 0.0}), bad), std::invalid_argument);
  EXPECT_THROW(ce_loss(var(Shape{2, 2}, {0, 0, 0, 0}), bad), std::invalid_argument);
}

TEST(LocalCeLoss, AveragesOverPatches) {
  const std::vector<std::size_t> label{0};
  const double v = local_ce_loss(var(Shape{1, 2, 2}, {0.0, 0.0, 1.0, 0.0}), label).item();
  EXPECT_NEAR(v, 0.5 * (std::log(2.0) + 0.31326168751822286), 1e-12);
}

TEST(CorrectnessMap, ConcentratedAndMixed) {
  const std::vector<std::size_t> label{1};
  const Tensor right = correctness_map(params_with_alpha(Shape{1, 1, 2, 2}, {1, 9, 1, 9}), label);
  for (double v : right.data()) EXPECT_EQ(v, 1.0);
  const Tensor wrong = correctness_map(params_with_alpha(Shape{1, 1, 2, 2}, {9, 1, 9, 1}), label);
  for (double v : wrong.data()) EXPECT_EQ(v, 0.0);
  const Tensor mixed =
      correctness_map(params_with_alpha(Shape{1, 2, 2, 2}, {1, 5, 5, 1, 1, 5, 2, 3}), label);
  EXPECT_EQ(std::vector<double>(mixed.data().begin(), mixed.data().end()), (std::vector<double>{1, 0, 1, 1}));
}

TEST(CorrectnessMap, TiesGoToLowestClass) {
  EXPECT_EQ(correctness_map(params_with_alpha(Shape{1, 1, 1, 2}, {2, 2}), std::vector<std::size_t>{0})[0], 1.0);
  EXPECT_EQ(correctness_map(params_with_alpha(Shape{1, 1, 1, 2}, {2, 2}), std::vector<std::size_t>{1})[0], 0.0);
}

TEST(UncertaintyLoss, ClosedForms) {
  const Tensor c1(Shape{1, 2, 2}, 1.0), c0(Shape{1, 2, 2}, 0.0);
  EXPECT_NEAR(uncertainty_loss(Var(Tensor(Shape{1, 2, 2}, 0.0)), c1).item(), 0.0, 1e-15);
  EXPECT_NEAR(uncertainty_loss(Var(Tensor(Shape{1, 2, 2}, 0.3)), c1).item(), 0.09, 1e-12);
  EXPECT_NEAR(uncertainty_loss(Var(Tensor(Shape{1, 2, 2}, 0.0)), c0).item(), 1.0, 1e-15);
  EXPECT_THROW(uncertainty_loss(Var(Tensor(Shape{1, 2, 3}, 0.0)), c0), ShapeError);
}

TEST(ConsistencyLoss, ClosedForms) {
  const Var zg = var(Shape{1, 2}, {0.0, 0.0});
  const double kl = consistency_loss(var(Shape{1, 1, 2}, {std::log(0.8), std::log(0.2)}), var(Shape{1, 1}, {1.0}), zg).item();
  EXPECT_NEAR(kl, 0.8 * std::log(1.6) + 0.2 * std::log(0.4), 1e-12);
  EXPECT_NEAR(kl, 0.1927, 1e-4);
  const Var same = var(Shape{1, 2, 3}, {0.3, -1.0, 2.0, 0.3, -1.0, 2.0});
  EXPECT_NEAR(consistency_loss(same, var(Shape{1, 2}, {0.7, 0.2}), var(Shape{1, 3}, {0.3, -1.0, 2.0})).item(), 0.0, 1e-14);
  EXPECT_EQ(consistency_loss(var(Shape{1, 2, 2}, {5, 0, 0, 5}), var(Shape{1, 2}, {0.0, 0.0}), zg).item(), 0.0);
}

TEST(ConfidenceLoss, ClosedForms) {
  const std::vector<std::size_t> label{0};
  EXPECT_NEAR(confidence_loss(var(Shape{1, 2}, {1.0, 1.0}), one_hot_logits({0, 0}, 2), label).item(), 0.0, 1e-15);
  EXPECT_NEAR(confidence_loss(var(Shape{1, 1}, {0.5}), one_hot_logits({0}, 2), label).item(), 0.25, 1e-15);
  EXPECT_NEAR(confidence_loss(var(Shape{1, 2}, {1.0, 0.0}), one_hot_logits({1, 0}, 2), label).item(), 1.0, 1e-15);
}

TEST(DiversityLoss, ClosedForms) {
  EXPECT_NEAR(diversity_loss(var(Shape{1, 2, 3}, {0.1, 0.5, -0.2, 0.1, 0.5, -0.2})).item(), 1.0, 1e-12);
  EXPECT_NEAR(diversity_loss(one_hot_logits({0, 1}, 2)).item(), 0.0, 1e-4);
  EXPECT_NEAR(diversity_loss(one_hot_logits({0, 0, 1}, 2)).item(), 1.0 / 3.0, 1e-4);
  EXPECT_EQ(diversity_loss(one_hot_logits({0}, 2)).item(), 0.0);
}

TEST(Losses, ComponentsNonNegativeAndDiversityBounded) {
  Rng rng(11, "losses");
  for (int t = 0; t < 200; ++t) {
    const std::size_t b = 1 + rng.uniform_int(0, 2), k = 1 + rng.uniform_int(0, 3), c = 2 + rng.uniform_int(0, 2);
    Tensor z(Shape{b, k, c}), zg(Shape{b, c}), conf(Shape{b, k});
    for (double& v : z.data()) v = rng.normal(0.0, 3.0);
    for (double& v : zg.data()) v = rng.normal(0.0, 3.0);
    for (double& v : conf.data()) v = rng.uniform();
    std::vector<std::size_t> labels(b);
    for (auto& l : labels) l = rng.uniform_int(0, static_cast<std::int64_t>(c - 1));
    EXPECT_GE(ce_loss(Var(zg), labels).item(), 0.0);
    EXPECT_GE(local_ce_loss(Var(z), labels).item(), 0.0);
    EXPECT_GE(consistency_loss(Var(z), Var(conf), Var(zg)).item(), -1e-15);
    EXPECT_GE(confidence_loss(Var(conf), Var(z), labels).item(), 0.0);
    const double d = diversity_loss(Var(z)).item();
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0 + 1e-12);
  }
}

TEST(TotalLoss, WeightPresets) {
  EXPECT_NEAR(total_loss(all_ones(), LossWeights::baseline()).breakdown.total, 2.7, 1e-12);
  EXPECT_NEAR(total_loss(all_ones(), LossWeights::uncertainty_focus()).breakdown.total, 3.0, 1e-12);
  EXPECT_EQ(total_loss(all_ones(), LossWeights::zero()).breakdown.total, 0.0);
  const LossWeights w = LossWeights::baseline();
  EXPECT_EQ(w.fused, 1.0);
  EXPECT_EQ(w.global, 0.5);
  EXPECT_EQ(w.local, 0.5);
  EXPECT_EQ(w.uncertainty, 0.3);
  EXPECT_EQ(w.consistency, 0.2);
  EXPECT_EQ(w.confidence, 0.1);
  EXPECT_EQ(w.diversity, 0.1);
}

TEST(TotalLoss, BreakdownMatchesWeightedSum) {
  LossTerms t;
  t.fused = var(Shape{}, {0.7});
  t.global = var(Shape{}, {1.3});
  t.local = var(Shape{}, {0.2});
  t.uncertainty = var(Shape{}, {0.11});
  t.consistency = var(Shape{}, {0.05});
  const TotalLoss out = total_loss(t, LossWeights::baseline());
  EXPECT_EQ(out.breakdown.total, out.breakdown.weighted_sum());
  EXPECT_EQ(out.breakdown.total, out.total.item());
  EXPECT_EQ(out.breakdown.confidence, 0.0);
  LossWeights neg;
  neg.local = -0.1;
  EXPECT_THROW(total_loss(t, neg), std::invalid_argument);
}

TEST(TotalLoss, ZeroWeightDetachesComponentGradient) {
  const Var fused_in = var(Shape{1, 2}, {0.3, -0.2}, true);
  const Var patch_in = var(Shape{1, 2, 2}, {0.5, 0.1, -0.4, 0.9}, true);
  LossTerms t;
  t.fused = ce_loss(fused_in, std::vector<std::size_t>{0});
  t.diversity = diversity_loss(patch_in);
  LossWeights w = LossWeights::zero();
  w.fused = 1.0;
  const TotalLoss out = total_loss(t, w);
  backward(out.total);
  EXPECT_TRUE(fused_in.has_grad());
  EXPECT_FALSE(patch_in.has_grad());
  EXPECT_GT(out.breakdown.diversity, 0.0);

  const Var patch_again = var(Shape{1, 2, 2}, {0.5, 0.1, -0.4, 0.9}, true);
  t.diversity = diversity_loss(patch_again);
  w.diversity = 0.1;
  backward(total_loss(t, w).total);
  EXPECT_TRUE(patch_again.has_grad());
}
