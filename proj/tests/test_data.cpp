#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "ugpl/data/augment.hpp"
#include "ugpl/data/dataset.hpp"
#include "ugpl/data/pgm.hpp"

using namespace ugpl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ugpl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticConfig small_synth(std::size_t per_class = 10, std::uint64_t seed = 3) {
  SyntheticConfig c;
  c.height = c.width = 32;
  c.samples_per_class = per_class;
  c.seed = seed;
  return c;
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.size());
}

Tensor ramp(std::size_t h, std::size_t w) {
  Tensor t(Shape{h, w, 1});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / static_cast<double>(t.size());
  return t;
}

}  // namespace

TEST(Pgm, RoundTripWithinQuantization) {
  const fs::path dir = temp_dir("pgm");
  Rng rng(1, "pgm");
  Tensor img(Shape{7, 5, 1});
  for (double& v : img.data()) v = rng.uniform();
  write_pgm(dir / "a.pgm", img);
  const Tensor back = read_pgm(dir / "a.pgm");
  ASSERT_EQ(back.shape(), (Shape{7, 5}));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back[i] - img[i]), 0.5 / 255.0 + 1e-12);
  fs::remove_all(dir);
}

TEST(Pgm, RejectsMalformedFiles) {
  const fs::path dir = temp_dir("pgm_bad");
  std::ofstream(dir / "ascii.pgm") << "P2\n2 2\n255\n0 0 0 0\n";
  std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\n\x01\x02";
  EXPECT_THROW(read_pgm(dir / "ascii.pgm"), PgmError);
  EXPECT_THROW(read_pgm(dir / "short.pgm"), PgmError);
  EXPECT_THROW(read_pgm(dir / "missing.pgm"), PgmError);
  fs::remove_all(dir);
}

TEST(Synthetic, DeterministicAndBalanced) {
  const auto a = synthesize_samples(small_synth());
  const auto b = synthesize_samples(small_synth());
  ASSERT_EQ(a.size(), 30u);
  std::array<int, 3> counts{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].label, b[i].label);
    for (std::size_t p = 0; p < a[i].image.size(); ++p) ASSERT_EQ(a[i].image[p], b[i].image[p]);
    for (double v : a[i].image.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    ++counts[a[i].label];
  }
  EXPECT_EQ(counts, (std::array<int, 3>{10, 10, 10}));
  const auto c = synthesize_samples(small_synth(10, 4));
  EXPECT_NE(a[0].image[32 * 16 + 16], c[0].image[32 * 16 + 16]);
}

TEST(Synthetic, FocalLesionBrighterThanNormalOnAverage) {
  SyntheticConfig c;
  c.samples_per_class = 100;
  c.seed = 9;
  double normal = 0.0, focal = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    normal += mean_of(synthesize_sample(c, 0, i).image);
    focal += mean_of(synthesize_sample(c, 1, i).image);
  }
  EXPECT_GT(focal / 100.0, normal / 100.0);
}

TEST(Synthetic, ConfigValidationAndJson) {
  SyntheticConfig c;
  c.height = c.width = 20;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SyntheticConfig{};
  c.lesion_radius_min = 6.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  const SyntheticConfig d = SyntheticConfig::from_json(small_synth().to_json());
  EXPECT_EQ(d.height, 32u);
  EXPECT_EQ(d.seed, 3u);
}

TEST(Split, StratifiedDisjointAndCovering) {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < 3; ++c)
    for (int i = 0; i < 334; ++i) labels.push_back(c);
  const SplitIndices s = stratified_split(labels, 3, 1);
  EXPECT_EQ(s.train.size(), 601u);
  EXPECT_EQ(s.val.size(), 200u);
  EXPECT_EQ(s.test.size(), 201u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    std::array<double, 3> per_class{};
    for (std::size_t i : *part) {
      EXPECT_TRUE(all.insert(i).second);
      ++per_class[labels[i]];
    }
    for (double n : per_class) EXPECT_LE(std::abs(n - part->size() / 3.0), 1.0);
  }
  EXPECT_EQ(all.size(), labels.size());
  EXPECT_EQ(stratified_split(labels, 3, 1).train, s.train);
  EXPECT_NE(stratified_split(labels, 3, 2).train, s.train);
}

TEST(Normalization, TrainStatsOnly) {
  std::vector<Sample> samples(2);
  samples[0].image = Tensor(Shape{1, 2, 1}, std::vector<double>{0.0, 1.0});
  samples[1].image = Tensor(Shape{1, 2, 1}, std::vector<double>{5.0, 5.0});
  const NormalizationStats s = compute_stats(samples, {0});
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.std, 0.5);
  const Tensor n = normalize(samples[0].image, s);
  EXPECT_DOUBLE_EQ(n[0], -1.0);
  EXPECT_DOUBLE_EQ(n[1], 1.0);
  EXPECT_EQ(compute_stats(samples, {1}).std, 1e-8);
}

TEST(Dataset, WriteLoadRoundTrip) {
  const fs::path dir = temp_dir("roundtrip");
  const Dataset d = make_synthetic_dataset(small_synth(5));
  write_dataset(d, dir);
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.samples.size(), d.samples.size());
  EXPECT_EQ(back.class_names, d.class_names);
  EXPECT_EQ(back.splits.train, d.splits.train);
  EXPECT_EQ(back.splits.test, d.splits.test);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].id, d.samples[i].id);
    EXPECT_EQ(back.samples[i].label, d.samples[i].label);
    for (std::size_t p = 0; p < d.samples[i].image.size(); ++p)
      worst = std::max(worst, std::abs(back.samples[i].image[p] - d.samples[i].image[p]));
  }
  EXPECT_LE(worst, 1.0 / 255.0);
  EXPECT_NEAR(back.stats.mean, d.stats.mean, 1.0 / 255.0);
  fs::remove_all(dir);
}

TEST(Dataset, LoadReportsProblems) {
  const fs::path empty = temp_dir("empty");
  EXPECT_THROW(load_dataset(empty), DatasetError);
  EXPECT_THROW(load_dataset(empty / "nope"), DatasetError);

  const fs::path dir = temp_dir("broken");
  write_dataset(make_synthetic_dataset(small_synth(2)), dir);
  const Dataset ok = load_dataset(dir);
  fs::remove(dir / "images" / (ok.samples[0].id + ".pgm"));
  {
    std::ofstream f(dir / "labels.csv", std::ios::app);
    f << "extra,images/extra.pgm,7\n";
    f << "garbage line\n";
  }
  try {
    load_dataset(dir);
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_GE(e.problems().size(), 3u);
  }
  fs::remove_all(empty);
  fs::remove_all(dir);
}

TEST(Dataset, LoadResizesOnRequest) {
  const fs::path dir = temp_dir("resize");
  write_dataset(make_synthetic_dataset(small_synth(2)), dir);
  LoadOptions opts;
  opts.height = opts.width = 48;
  const Dataset d = load_dataset(dir, opts);
  EXPECT_EQ(d.samples[0].image.shape(), (Shape{48, 48, 1}));
  fs::remove_all(dir);
}

TEST(Augment, Helpers) {
  const Tensor img = ramp(2, 3);
  const Tensor h = flip_horizontal(img);
  EXPECT_EQ(h[0], img[2]);
  EXPECT_EQ(h[3], img[5]);
  const Tensor v = flip_vertical(img);
  EXPECT_EQ(v[0], img[3]);
  const Tensor t = translate(img, 1, 0);
  EXPECT_EQ(t[0], 0.0);
  EXPECT_EQ(t[3], img[0]);
  const Tensor r = rotate(ramp(5, 5), 0.0);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(r[i], ramp(5, 5)[i], 1e-12);
  const Tensor r90 = rotate(ramp(5, 5), 360.0);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(r90[i], ramp(5, 5)[i], 1e-9);
  const Tensor bc = adjust_brightness_contrast(Tensor(Shape{1, 2, 1}, std::vector<double>{0.2, 0.6}), 1.0, 0.5);
  EXPECT_NEAR(bc[0], 0.3, 1e-12);
  EXPECT_NEAR(bc[1], 0.5, 1e-12);
  const Tensor clipped = adjust_brightness_contrast(Tensor(Shape{1, 1, 1}, 0.9), 2.0, 1.0);
  EXPECT_EQ(clipped[0], 1.0);
}

TEST(Augment, PreservesLabelShapeRangeAndIsSeeded) {
  const Sample s = synthesize_sample(small_synth(), 1, 0);
  AugmentConfig cfg;
  for (int t = 0; t < 20; ++t) {
    Rng a(t, "aug"), b(t, "aug");
    const Sample x = augment(s, a, cfg), y = augment(s, b, cfg);
    EXPECT_EQ(x.label, 1u);
    EXPECT_EQ(x.image.shape(), s.image.shape());
    for (std::size_t i = 0; i < x.image.size(); ++i) {
      ASSERT_EQ(x.image[i], y.image[i]);
      ASSERT_GE(x.image[i], 0.0);
      ASSERT_LE(x.image[i], 1.0);
    }
  }
  AugmentConfig none;
  none.horizontal_flip = none.vertical_flip = false;
  none.max_shift_fraction = none.brightness = none.contrast = 0.0;
  none.rotation_probability = 0.0;
  Rng plain(1, "aug");
  const Sample untouched = augment(s, plain, none);
  for (std::size_t i = 0; i < s.image.size(); ++i) ASSERT_NEAR(untouched.image[i], s.image[i], 1e-12);
  none.rotation_probability = 1.0;
  Rng rot(1, "aug");
  const Sample smoothed = augment(s, rot, none);
  double diff = 0.0;
  for (std::size_t i = 0; i < s.image.size(); ++i) diff += std::abs(smoothed.image[i] - s.image[i]);
  EXPECT_GT(diff, 0.0);

  cfg.enabled = false;
  Rng rng(0, "aug");
  const Sample same = augment(s, rng, cfg);
  for (std::size_t i = 0; i < s.image.size(); ++i) EXPECT_EQ(same.image[i], s.image[i]);
}
