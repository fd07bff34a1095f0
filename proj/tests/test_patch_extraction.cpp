#include <set>

#include <gtest/gtest.h>

#include "support/patch_oracle.hpp"
#include "ugpl/patch_extraction.hpp"

using namespace ugpl;

namespace {

Tensor zeros_image(std::size_t h, std::size_t w) { return Tensor(Shape{h, w, 1}, 0.0); }

Tensor random_map(std::size_t h, std::size_t w, Rng& rng, bool sparse = false) {
  Tensor m(Shape{h, w});
  for (double& v : m.data()) v = sparse && rng.coin(0.8) ? 0.0 : rng.uniform();
  return m;
}

PatchExtractConfig cfg(std::size_t p, std::size_t k, Suppression s = Suppression::kHardMask,
                       Selection sel = Selection::kWindowMean) {
  PatchExtractConfig c;
  c.patch_size = p;
  c.num_patches = k;
  c.suppression = s;
  c.selection = sel;
  return c;
}

}  // namespace

TEST(Upsample, ConstantAndSinglePixel) {
  const Tensor up = upsample_bilinear(Tensor(Shape{2, 3}, 0.4), 5, 7);
  for (double v : up.data()) EXPECT_DOUBLE_EQ(v, 0.4);
  const Tensor one = upsample_bilinear(Tensor(Shape{1, 1}, 0.7), 4, 4);
  for (double v : one.data()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Upsample, CornerAlignedClosedForm) {
  const Tensor up = upsample_bilinear(Tensor(Shape{2, 2}, std::vector<double>{0, 1, 0, 1}), 2, 4);
  const std::vector<double> row{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(up[r * 4 + c], row[c], 1e-15);
}

TEST(Upsample, RejectsShrinking) { EXPECT_THROW(upsample_bilinear(Tensor(Shape{4, 4}), 2, 8), ShapeError); }

TEST(ExtractPatches, ZeroMapFallsBackDeterministically) {
  const Tensor img = zeros_image(32, 32);
  const Tensor map(Shape{8, 8}, 0.0);
  Rng a(1, "x"), b(1, "x");
  const PatchSet pa = extract_patches(img, map, cfg(8, 2), a);
  const PatchSet pb = extract_patches(img, map, cfg(8, 2), b);
  ASSERT_EQ(pa.coords.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_TRUE(pa.fallback_used[k]);
    EXPECT_LE(pa.coords[k].x, 24u);
    EXPECT_LE(pa.coords[k].y, 24u);
    EXPECT_EQ(pa.coords[k], pb.coords[k]);
  }
}

TEST(ExtractPatches, DeltaPeakTieBreak) {
  Tensor map(Shape{32, 32}, 0.0);
  map[10 * 32 + 10] = 1.0;
  Rng rng(0, "x");
  const PatchSet p = extract_patches(zeros_image(32, 32), map, cfg(8, 1), rng);
  EXPECT_EQ(p.coords[0], (PatchCoord{3, 3}));
  EXPECT_FALSE(p.fallback_used[0]);
}

TEST(ExtractPatches, TwoPeaksGreedyOrder) {
  Tensor map(Shape{32, 32}, 0.0);
  map[4 * 32 + 4] = 1.0;
  map[24 * 32 + 24] = 0.8;
  PatchExtractConfig c = cfg(8, 2);
  c.margin = 2;
  Rng rng(0, "x");
  const PatchSet p = extract_patches(zeros_image(32, 32), map, c, rng);
  auto covers = [](const PatchCoord& at, std::size_t y, std::size_t x) {
    return y >= at.y && y < at.y + 8 && x >= at.x && x < at.x + 8;
  };
  EXPECT_TRUE(covers(p.coords[0], 4, 4));
  EXPECT_TRUE(covers(p.coords[1], 24, 24));
  EXPECT_GE(p.scores[0], p.scores[1]);
  EXPECT_FALSE(p.fallback_used[0] || p.fallback_used[1]);
}

TEST(ExtractPatches, CornerPeakClampsToOrigin) {
  for (Selection sel : {Selection::kWindowMean, Selection::kPixelArgmax}) {
    Tensor map(Shape{16, 16}, 0.0);
    map[0] = 1.0;
    Rng a(0, "x"), b(0, "x");
    const PatchExtractConfig c = cfg(8, 1, Suppression::kHardMask, sel);
    const PatchSet p = extract_patches(zeros_image(16, 16), map, c, a);
    EXPECT_EQ(p.coords[0], (PatchCoord{0, 0}));
    EXPECT_EQ(p.coords, ugpl::testing::brute_force_reference(zeros_image(16, 16), map, c, b).coords);
  }
  Tensor map(Shape{16, 16}, 0.0);
  map[15 * 16 + 15] = 1.0;
  Rng rng(0, "x");
  const PatchSet p = extract_patches(zeros_image(16, 16), map, cfg(8, 1, Suppression::kHardMask, Selection::kPixelArgmax), rng);
  EXPECT_EQ(p.coords[0], (PatchCoord{8, 8}));
}

TEST(ExtractPatches, PatchContentsMatchImageWindow) {
  Tensor img(Shape{16, 16, 1});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i) / 256.0;
  Tensor map(Shape{16, 16}, 0.0);
  map[5 * 16 + 9] = 1.0;
  Rng rng(0, "x");
  const PatchSet p = extract_patches(img, map, cfg(4, 1), rng);
  const auto [x, y] = p.coords[0];
  ASSERT_EQ(p.patches[0].shape(), (Shape{4, 4, 1}));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(p.patches[0][r * 4 + c], img[(y + r) * 16 + x + c]);
}

TEST(ExtractPatches, ConfigErrors) {
  Rng rng(0, "x");
  EXPECT_THROW(extract_patches(zeros_image(8, 8), Tensor(Shape{2, 2}), cfg(9, 1), rng), std::invalid_argument);
  EXPECT_THROW(extract_patches(zeros_image(8, 8), Tensor(Shape{2, 2}), cfg(4, 0), rng), std::invalid_argument);
  Tensor bad(Shape{2, 2}, 0.0);
  bad[0] = NAN;
  EXPECT_THROW(extract_patches(zeros_image(8, 8), bad, cfg(4, 1), rng), std::invalid_argument);
}

TEST(ExtractPatches, CropClippedAtBorderIsResized) {
  Tensor img(Shape{8, 8, 1}, 0.25);
  const Tensor p = crop_patch(img, 6, 6, 4);
  EXPECT_EQ(p.shape(), (Shape{4, 4, 1}));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ExtractPatches, OracleEquivalenceSeededSweep) {
  Rng gen(2024, "oracle");
  std::size_t cases = 0;
  for (Selection sel : {Selection::kWindowMean, Selection::kPixelArgmax}) {
    for (Suppression sup : {Suppression::kHardMask, Suppression::kGaussian}) {
      for (std::size_t p : {4, 8}) {
        for (std::size_t k : {1, 2, 3}) {
          for (int rep = 0; rep < 5; ++rep) {
            const std::size_t H = 16 + 8 * gen.uniform_int(0, 2);
            const std::size_t h = rep == 0 ? H : H / 4;
            const Tensor map = rep == 1 ? Tensor(Shape{h, h}, 0.5) : random_map(h, h, gen, rep == 2);
            Tensor img(Shape{H, H, 1});
            for (double& v : img.data()) v = gen.uniform();
            PatchExtractConfig c = cfg(p, k, sup, sel);
            if (rep == 3) c.margin = 0;
            const std::uint64_t seed = gen.next_u64();
            Rng a(seed, "patch"), b(seed, "patch");
            const PatchSet fast = extract_patches(img, map, c, a);
            const PatchSet ref = ugpl::testing::brute_force_reference(img, map, c, b);
            ASSERT_EQ(fast.coords, ref.coords) << "case " << cases;
            ASSERT_EQ(fast.fallback_used, ref.fallback_used) << "case " << cases;
            ++cases;
          }
        }
      }
    }
  }
  EXPECT_EQ(cases, 120u);
}

TEST(ExtractPatches, HardMaskWindowsNeverOverlapEarlierMasks) {
  Rng gen(7, "overlap");
  for (int t = 0; t < 100; ++t) {
    const std::size_t p = 4 + 4 * gen.uniform_int(0, 1);
    PatchExtractConfig c = cfg(p, 1 + gen.uniform_int(0, 3));
    c.margin = gen.uniform_int(0, 3);
    const Tensor map = random_map(8, 8, gen);
    Rng rng(t, "overlap");
    const PatchSet s = extract_patches(zeros_image(32, 32), map, c, rng);
    std::set<std::pair<std::size_t, std::size_t>> masked;
    for (std::size_t k = 0; k < s.coords.size(); ++k) {
      const auto [x, y] = s.coords[k];
      if (!s.fallback_used[k]) {
        for (std::size_t r = y; r < y + p; ++r)
          for (std::size_t col = x; col < x + p; ++col) ASSERT_FALSE(masked.count({r, col}));
      }
      const std::size_t m = c.effective_margin();
      for (std::size_t r = y > m ? y - m : 0; r < std::min<std::size_t>(y + p + m, 32); ++r)
        for (std::size_t col = x > m ? x - m : 0; col < std::min<std::size_t>(x + p + m, 32); ++col) masked.insert({r, col});
    }
  }
}

TEST(ExtractPatches, ScoresNonIncreasingWithoutFallback) {
  Rng gen(8, "scores");
  for (int t = 0; t < 100; ++t) {
    const Tensor map = random_map(8, 8, gen);
    Rng rng(t, "scores");
    const PatchSet s = extract_patches(zeros_image(32, 32), map, cfg(4, 3), rng);
    bool any_fallback = false;
    for (bool f : s.fallback_used) any_fallback = any_fallback || f;
    if (any_fallback) continue;
    for (std::size_t k = 1; k < s.scores.size(); ++k) EXPECT_LE(s.scores[k], s.scores[k - 1]);
  }
}

TEST(ExtractPatches, BoundsFuzzExtremeSettings) {
  Rng gen(9, "bounds");
  for (int t = 0; t < 200; ++t) {
    const std::size_t H = 4 + gen.uniform_int(0, 40);
    const std::size_t W = 4 + gen.uniform_int(0, 40);
    const std::size_t p = 1 + gen.uniform_int(0, static_cast<std::int64_t>(std::min(H, W) - 1));
    PatchExtractConfig c = cfg(p, 1 + gen.uniform_int(0, 6), gen.coin() ? Suppression::kHardMask : Suppression::kGaussian,
                               gen.coin() ? Selection::kWindowMean : Selection::kPixelArgmax);
    const Tensor map = random_map(1 + gen.uniform_int(0, static_cast<std::int64_t>(H - 1)),
                                  1 + gen.uniform_int(0, static_cast<std::int64_t>(W - 1)), gen, gen.coin());
    Rng rng(t, "bounds");
    const PatchSet s = extract_patches(zeros_image(H, W), map, c, rng);
    ASSERT_EQ(s.coords.size(), c.num_patches);
    for (std::size_t k = 0; k < s.coords.size(); ++k) {
      EXPECT_LE(s.coords[k].x, W - p);
      EXPECT_LE(s.coords[k].y, H - p);
      EXPECT_EQ(s.patches[k].shape(), (Shape{p, p, 1}));
    }
  }
}

TEST(ExtractPatches, GaussianKeepProfile) {
  const PatchCoord at{0, 0};
  EXPECT_NEAR(gaussian_keep(3, 3, PatchCoord{0, 0}, 7, 3.5), 0.0, 1e-15);
  EXPECT_GT(gaussian_keep(0, 0, at, 7, 3.5), gaussian_keep(2, 2, at, 7, 3.5));
}

TEST(ExtractPatches, ModeNamesRoundTrip) {
  for (Suppression s : {Suppression::kHardMask, Suppression::kGaussian}) EXPECT_EQ(suppression_from_string(to_string(s)), s);
  for (Selection s : {Selection::kWindowMean, Selection::kPixelArgmax}) EXPECT_EQ(selection_from_string(to_string(s)), s);
  EXPECT_THROW(suppression_from_string("soft"), std::invalid_argument);
}
