#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ugpl/numerics/rng.hpp"
#include "ugpl/numerics/tensor.hpp"

namespace ugpl {

enum class Suppression { kHardMask, kGaussian };
enum class Selection { kWindowMean, kPixelArgmax };

std::string to_string(Suppression s);
std::string to_string(Selection s);
Suppression suppression_from_string(const std::string& s);
Selection selection_from_string(const std::string& s);

struct PatchExtractConfig {
  std::size_t patch_size = 16;
  std::size_t num_patches = 3;
  std::optional<std::size_t> margin;     // defaults to patch_size / 4
  Suppression suppression = Suppression::kHardMask;
  std::optional<double> gaussian_sigma;  // defaults to patch_size / 2
  Selection selection = Selection::kWindowMean;
  // Weight of the explicit distance penalty. Kept for reference only:
  // suppression is what enforces spatial diversity.
  double diversity_lambda = 0.0;

  std::size_t effective_margin() const { return margin.value_or(patch_size / 4); }
  double effective_sigma() const { return gaussian_sigma.value_or(static_cast<double>(patch_size) / 2.0); }
  // Throws std::invalid_argument unless 0 < P <= min(H, W) and K >= 1.
  void validate(std::size_t height, std::size_t width) const;
};

struct PatchCoord {
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const PatchCoord&, const PatchCoord&) = default;
};

struct PatchSet {
  std::vector<Tensor> patches;  // each [P, P, 1]
  std::vector<PatchCoord> coords;
  std::vector<bool> fallback_used;
  std::vector<double> scores;
};

// Window sums are taken over values quantized to multiples of 2^-40, so sums
// are exact integers and ties are well defined regardless of summation order.
inline constexpr double kFixedPointScale = 1099511627776.0;  // 2^40
std::int64_t to_fixed(double value);

// Below this score (gaussian suppression) the map counts as exhausted.
inline constexpr double kGaussianExhaustedScore = 1e-12;

// Corner-aligned bilinear resampling of an [h, w] map to [height, width].
// Throws if the target is smaller than the source.
Tensor upsample_bilinear(const Tensor& map, std::size_t height, std::size_t width);

// Corner-aligned bilinear resize of an [h, w] or [h, w, 1] image to [P, P, 1].
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

// P x P crop with top-left (x, y). Regions outside the image are clipped and
// the clipped crop is resized back to P x P.
Tensor crop_patch(const Tensor& image, std::ptrdiff_t x, std::ptrdiff_t y, std::size_t patch_size);

// Multiplicative suppression weight 1 - G at pixel (row, col) for a patch
// with top-left (x, y).
double gaussian_keep(std::size_t row, std::size_t col, const PatchCoord& at, std::size_t patch_size, double sigma);

// Greedy uncertainty-guided selection of K patches. image: [H, W, 1] (or
// [H, W]); map: [h, w] with h <= H, w <= W.
PatchSet extract_patches(const Tensor& image, const Tensor& map, const PatchExtractConfig& config, Rng& rng);

}  // namespace ugpl
