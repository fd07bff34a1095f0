#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ugpl/harness/gradcheck_suite.hpp"
#include "ugpl/model/ugpl_model.hpp"
#include "ugpl/numerics/ops.hpp"

using namespace ugpl;

namespace {

Var var(Shape s, std::vector<double> v, bool grad = false) { return Var(Tensor(std::move(s), std::move(v)), grad); }

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

LocalNetConfig small_local() {
  LocalNetConfig c;
  c.encoder_channels = {3, 4, 4, 5};
  c.feature_dim = 5;
  c.cls_hidden = 4;
  c.conf_hidden = 3;
  return c;
}

void zero(Var& v) {
  for (double& x : v.mutable_value().data()) x = 0.0;
}

}  // namespace

TEST(GlobalModel, DefaultShapes) {
  Rng rng(1, "init");
  GlobalModel model(GlobalModelConfig{}, rng);
  const GlobalOutput out = model.forward(Var(Tensor(Shape{1, 64, 64, 1}, 0.2)), false);
  EXPECT_EQ(out.logits.shape(), (Shape{1, 3}));
  EXPECT_EQ(out.evidence.shape(), (Shape{1, 8, 8, 12}));
  EXPECT_EQ(out.features.shape(), (Shape{1, 8, 8, 64}));
}

TEST(GlobalModel, ZeroHeadsGiveZeroOutputs) {
  Rng rng(1, "init");
  GlobalModel model(GlobalModelConfig{}, rng);
  zero(model.classifier.weight);
  zero(model.classifier.bias);
  zero(model.evidence_out.weight);
  zero(model.evidence_out.bias);
  const GlobalOutput out = model.forward(Var(Tensor(Shape{1, 64, 64, 1}, 0.0)), false);
  for (double v : out.logits.value().data()) EXPECT_EQ(v, 0.0);
  for (double v : out.evidence.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(GlobalModel, ConfigValidation) {
  GlobalModelConfig c;
  c.input_height = 60;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GlobalModelConfig{};
  c.feature_dim = 32;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GlobalModelConfig{};
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(GlobalModel, RejectsWrongInputShape) {
  Rng rng(1, "init");
  GlobalModel model(GlobalModelConfig{}, rng);
  EXPECT_THROW(model.forward(Var(Tensor(Shape{1, 32, 32, 1}, 0.0)), false), ShapeError);
}

TEST(Aggregate, ClosedForms) {
  const Var z = var(Shape{1, 2, 2}, {1.0, 0.0, 3.0, 2.0});
  const Tensor eq = aggregate_local(z, var(Shape{1, 2}, {1.0, 1.0}), 1e-6).value();
  EXPECT_NEAR(eq[0], 2.0, 1e-5);
  EXPECT_NEAR(eq[1], 1.0, 1e-5);
  const Tensor w = aggregate_local(z, var(Shape{1, 2}, {1.0, 0.5}), 1e-6).value();
  EXPECT_NEAR(w[0], 2.5 / (1.5 + 1e-6), 1e-12);
  EXPECT_NEAR(w[0], 1.6667, 1e-4);
  EXPECT_NEAR(w[1], 0.6667, 1e-4);
  const Tensor first = aggregate_local(z, var(Shape{1, 2}, {1.0, 0.0}), 1e-6).value();
  EXPECT_NEAR(first[0], 1.0 / (1.0 + 1e-6), 1e-15);
  EXPECT_EQ(first[1], 0.0);
  const Tensor none = aggregate_local(z, var(Shape{1, 2}, {0.0, 0.0}), 1e-6).value();
  EXPECT_EQ(none[0], 0.0);
  EXPECT_EQ(none[1], 0.0);
}

TEST(Aggregate, PermutationAndScaleInvariance) {
  Rng rng(2, "agg");
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.uniform_int(0, 3);
    Tensor z(Shape{1, k, 3}), c(Shape{1, k});
    for (double& v : z.data()) v = rng.normal(0.0, 2.0);
    for (double& v : c.data()) v = rng.uniform(0.05, 1.0);
    Tensor zr(z.shape()), cr(c.shape());
    for (std::size_t j = 0; j < k; ++j) {
      cr[j] = c[k - 1 - j];
      for (std::size_t i = 0; i < 3; ++i) zr[j * 3 + i] = z[(k - 1 - j) * 3 + i];
    }
    const Tensor a = aggregate_local(Var(z), Var(c), 1e-6).value();
    const Tensor b = aggregate_local(Var(zr), Var(cr), 1e-6).value();
    Tensor cs = c;
    for (double& v : cs.data()) v *= 0.37;
    const Tensor exact = aggregate_local(Var(z), Var(c), 0.0).value();
    const Tensor scaled = aggregate_local(Var(z), Var(cs), 0.0).value();
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(a[i], b[i], 1e-12);
      EXPECT_NEAR(exact[i], scaled[i], 1e-12);
    }
  }
}

TEST(LocalNet, ShapesConfidenceRangeAndIdenticalPatches) {
  Rng rng(3, "init");
  LocalNet net(small_local(), rng);
  Rng data(4, "data");
  Tensor one = random_tensor(Shape{1, 16, 16, 1}, data);
  Tensor patches(Shape{4, 16, 16, 1});
  for (std::size_t k = 0; k < 4; ++k) std::copy(one.data().begin(), one.data().end(), patches.data().begin() + k * 256);
  const LocalOutput out = net.forward(Var(patches), 2, 2, false);
  EXPECT_EQ(out.patch_logits.shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(out.confidences.shape(), (Shape{2, 2}));
  EXPECT_EQ(out.aggregated_logits.shape(), (Shape{2, 3}));
  for (std::size_t k = 1; k < 4; ++k) {
    EXPECT_EQ(out.confidences.value()[k], out.confidences.value()[0]);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.patch_logits.value()[k * 3 + c], out.patch_logits.value()[c]);
  }
  for (double c : out.confidences.value().data()) {
    EXPECT_GT(c, 0.0);
    EXPECT_LT(c, 1.0);
  }
  EXPECT_EQ(net.encode(Var(patches), false).shape(), (Shape{4, 5}));
}

TEST(LocalNet, RejectsSmallPatches) {
  Rng rng(3, "init");
  LocalNet net(small_local(), rng);
  EXPECT_THROW(net.forward(Var(Tensor(Shape{2, 8, 8, 1}, 0.0)), 1, 2, false), std::invalid_argument);
}

TEST(LocalNet, DefaultArchitectureWidths) {
  Rng rng(3, "init");
  LocalNet net(LocalNetConfig{}, rng);
  EXPECT_EQ(net.cls_hidden.weight.shape(), (Shape{256, 128}));
  EXPECT_EQ(net.cls_out.weight.shape(), (Shape{128, 3}));
  EXPECT_EQ(net.conf_hidden.weight.shape(), (Shape{256, 64}));
  EXPECT_EQ(net.conf_out.weight.shape(), (Shape{64, 1}));
  LocalNetConfig bad;
  bad.encoder_channels = {64, 32, 256, 256};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(LocalNet, FusedLossReachesBothHeadsAndEncoder) {
  Rng rng(5, "init");
  LocalNet net(small_local(), rng);
  Rng data(6, "data");
  const LocalOutput out = net.forward(Var(random_tensor(Shape{2, 16, 16, 1}, data)), 1, 2, true);
  backward(ce_loss(out.aggregated_logits, std::vector<std::size_t>{1}));
  for (const auto& [name, p] : net.parameters().params()) {
    ASSERT_TRUE(p.has_grad()) << name;
    double norm = 0.0;
    for (double g : p.grad().data()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0) << name;
  }
}

TEST(Fusion, ScalarUncertainty) {
  EXPECT_NEAR(scalar_uncertainty(Var(Tensor(Shape{2, 2}, 0.5))).item(), 0.5, 1e-15);
  EXPECT_NEAR(scalar_uncertainty(var(Shape{2, 2}, {0, 1, 1, 0})).item(), 0.5, 1e-15);
  EXPECT_NEAR(scalar_uncertainty(var(Shape{2, 2}, {0.1, 0.2, 0.3, 0.4})).item(), 0.25, 1e-15);
  EXPECT_EQ(scalar_uncertainty(Var(Tensor(Shape{3, 2, 2}, 0.0))).shape(), (Shape{3}));
}

TEST(Fusion, InjectedBoundariesAndMidpoint) {
  Rng rng(7, "init");
  FusionConfig cfg;
  cfg.num_classes = 2;
  const FusionNet net(cfg, rng);
  const Var zg = var(Shape{1, 2}, {2.0, 0.0}), zl = var(Shape{1, 2}, {0.0, 2.0}), u = var(Shape{1}, {0.4});
  const Tensor one = fuse(zg, u, zl, net, 1.0).fused_logits.value();
  const Tensor zero = fuse(zg, u, zl, net, 0.0).fused_logits.value();
  const Tensor half = fuse(zg, u, zl, net, 0.5).fused_logits.value();
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(one[i], zg.value()[i]);
    EXPECT_EQ(zero[i], zl.value()[i]);
    EXPECT_EQ(half[i], 1.0);
  }
}

// Rounding in w*a + (1-w)*b can land about one ulp outside [min, max].
TEST(Fusion, FusedLogitsBetweenInputs) {
  Rng init(8, "init");
  const FusionNet net(FusionConfig{}, init);
  Rng rng(9, "between");
  for (int t = 0; t < 1000; ++t) {
    Tensor zg(Shape{1, 3}), zl(Shape{1, 3});
    const double scale = std::pow(10.0, rng.uniform(-2.0, 3.0));
    for (double& v : zg.data()) v = rng.normal(0.0, scale);
    for (double& v : zl.data()) v = rng.normal(0.0, scale);
    const FusionOutput out = fuse(Var(zg), var(Shape{1}, {rng.uniform()}), Var(zl), net);
    const double w = out.w_g.value()[0];
    ASSERT_GE(w, 0.0);
    ASSERT_LE(w, 1.0);
    if (scale <= 1.0) {
      ASSERT_GT(w, 0.0);
      ASSERT_LT(w, 1.0);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const double lo = std::min(zg[i], zl[i]), hi = std::max(zg[i], zl[i]);
      const double slack = 1e-12 * std::max(std::abs(lo), std::abs(hi));
      const double f = out.fused_logits.value()[i];
      ASSERT_GE(f, lo - slack);
      ASSERT_LE(f, hi + slack);
    }
  }
}

TEST(Fusion, FusedLossReachesGateAndBothLogits) {
  Rng rng(7, "init");
  const FusionNet net(FusionConfig{}, rng);
  const Var zg = var(Shape{1, 3}, {0.4, -0.3, 0.1}, true), zl = var(Shape{1, 3}, {-0.2, 0.5, 0.3}, true);
  backward(ce_loss(fuse(zg, var(Shape{1}, {0.2}), zl, net).fused_logits, std::vector<std::size_t>{2}));
  EXPECT_TRUE(zg.has_grad());
  EXPECT_TRUE(zl.has_grad());
  for (const auto& [name, p] : net.parameters().params()) EXPECT_TRUE(p.has_grad()) << name;
}

TEST(Fusion, RejectsNonFiniteAndBadShapes) {
  Rng rng(7, "init");
  const FusionNet net(FusionConfig{}, rng);
  const Var ok = var(Shape{1, 3}, {0, 0, 0}), u = var(Shape{1}, {0.1});
  EXPECT_THROW(fuse(var(Shape{1, 3}, {NAN, 0, 0}), u, ok, net), std::invalid_argument);
  EXPECT_THROW(fuse(ok, var(Shape{1}, {INFINITY}), ok, net), std::invalid_argument);
  EXPECT_THROW(fuse(ok, u, var(Shape{1, 2}, {0, 0}), net), ShapeError);
}

TEST(FixedPatchGrid, SquareAndDiagonalLayouts) {
  const auto four = fixed_patch_grid(64, 64, 16, 4);
  ASSERT_EQ(four.size(), 4u);
  EXPECT_EQ(four[0], (PatchCoord{8, 8}));
  EXPECT_EQ(four[3], (PatchCoord{40, 40}));
  const auto one = fixed_patch_grid(64, 64, 16, 1);
  EXPECT_EQ(one[0], (PatchCoord{24, 24}));
  const auto two = fixed_patch_grid(64, 64, 16, 2);
  EXPECT_EQ(two[0], (PatchCoord{8, 8}));
  EXPECT_EQ(two[1], (PatchCoord{40, 40}));
  for (const auto& c : fixed_patch_grid(20, 20, 16, 3)) {
    EXPECT_LE(c.x, 4u);
    EXPECT_LE(c.y, 4u);
  }
}

TEST(UgplModel, ModesProduceExpectedStructure) {
  const UgplConfig cfg = gradcheck_model_config();
  Rng rng(10, "init");
  UgplModel model(cfg, rng);
  Rng data(11, "data");
  const Tensor images = random_tensor(Shape{2, 32, 32, 1}, data);
  const std::vector<std::uint64_t> seeds{1, 2};
  for (AblationMode mode : all_ablation_modes()) {
    const Prediction p = model.forward(images, mode, false, seeds);
    EXPECT_EQ(p.fused_logits.shape(), (Shape{2, 3})) << to_string(mode);
    EXPECT_EQ(p.has_local, mode != AblationMode::kGlobalOnly);
    if (mode == AblationMode::kGlobalOnly) {
      EXPECT_TRUE(p.patch_sets.empty());
      EXPECT_EQ(p.w_g.value()[0], 1.0);
      for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(p.fused_logits.value()[i], p.global.logits.value()[i]);
    } else {
      ASSERT_EQ(p.patch_sets.size(), 2u);
      EXPECT_EQ(p.patch_sets[0].coords.size(), cfg.patches.num_patches);
    }
    if (mode == AblationMode::kFixedPatches) {
      EXPECT_EQ(p.patch_sets[0].coords, fixed_patch_grid(32, 32, cfg.patches.patch_size, cfg.patches.num_patches));
    }
    const LossTerms terms = loss_terms(p, std::vector<std::size_t>{0, 2}, mode);
    EXPECT_TRUE(terms.fused.defined());
    EXPECT_TRUE(terms.uncertainty.defined());
    EXPECT_EQ(terms.local.defined(), mode != AblationMode::kGlobalOnly);
  }
  EXPECT_EQ(ablation_from_string("no_ug"), AblationMode::kNoUg);
  EXPECT_THROW(ablation_from_string("bogus"), std::invalid_argument);
}

TEST(UgplModel, ForwardIsDeterministicAndSeedSensitiveForNoUg) {
  const UgplConfig cfg = gradcheck_model_config();
  Rng rng(10, "init");
  UgplModel model(cfg, rng);
  Rng data(12, "data");
  const Tensor images = random_tensor(Shape{1, 32, 32, 1}, data);
  const std::vector<std::uint64_t> s1{5}, s2{6};
  const Prediction a = model.forward(images, AblationMode::kFull, false, s1);
  const Prediction b = model.forward(images, AblationMode::kFull, false, s1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.fused_logits.value()[i], b.fused_logits.value()[i]);
  bool differs = false;
  for (int t = 0; t < 5 && !differs; ++t) {
    const std::vector<std::uint64_t> s{static_cast<std::uint64_t>(100 + t)};
    differs = model.forward(images, AblationMode::kNoUg, false, s1).patch_sets[0].coords !=
              model.forward(images, AblationMode::kNoUg, false, s).patch_sets[0].coords;
  }
  EXPECT_TRUE(differs);
  (void)s2;
}

TEST(UgplModel, SmallPatchesAreResizedForLocalNet) {
  UgplConfig cfg = gradcheck_model_config();
  cfg.patches.patch_size = 8;
  Rng rng(10, "init");
  UgplModel model(cfg, rng);
  const std::vector<std::uint64_t> seeds{1};
  const Prediction p = model.forward(Tensor(Shape{1, 32, 32, 1}, 0.3), AblationMode::kFull, false, seeds);
  EXPECT_EQ(p.patch_sets[0].patches[0].shape(), (Shape{8, 8, 1}));
  EXPECT_EQ(p.local.patch_logits.shape(), (Shape{1, 2, 3}));
}
