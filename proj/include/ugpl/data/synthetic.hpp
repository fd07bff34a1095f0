#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ugpl/numerics/tensor.hpp"

namespace ugpl {

inline constexpr std::size_t kSyntheticClasses = 3;
const std::vector<std::string>& synthetic_class_names();  // normal, focal_lesion, diffuse_texture

struct Sample {
  Tensor image;  // [H, W, 1] in [0, 1]
  std::size_t label = 0;
  std::string id;
};

struct SyntheticConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t samples_per_class = 100;
  double lesion_radius_min = 3.0;
  double lesion_radius_max = 5.0;
  double lesion_contrast_min = 0.25;
  double lesion_contrast_max = 0.45;
  double noise_sigma = 0.05;
  double texture_amplitude = 0.08;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when the image is too small for a lesion.
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticConfig from_json(const nlohmann::json& j);
};

// One image; depends only on (config, label, index).
Sample synthesize_sample(const SyntheticConfig& config, std::size_t label, std::size_t index);

// samples_per_class images of each class, class-major order.
std::vector<Sample> synthesize_samples(const SyntheticConfig& config);

}  // namespace ugpl
