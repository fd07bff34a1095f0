#pragma once

#include <cstddef>
#include <vector>

#include "ugpl/nn/layers.hpp"

namespace ugpl {

struct GlobalModelConfig {
  std::size_t input_height = 64;
  std::size_t input_width = 64;
  std::size_t num_classes = 3;
  std::vector<std::size_t> backbone_channels{16, 32, 64};
  std::size_t downsample_factor = 8;
  // Must equal backbone_channels.back().
  std::size_t feature_dim = 64;
  std::size_t evidence_hidden = 32;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;
  std::size_t feature_height() const { return input_height / downsample_factor; }
  std::size_t feature_width() const { return input_width / downsample_factor; }
};

struct GlobalOutput {
  Var logits;    // [N, C]
  Var evidence;  // [N, h, w, 4C]
  Var features;  // [N, h, w, d]
};

// conv3x3-BN-ReLU-conv3x3-BN plus identity (or 1x1 projection) shortcut.
class ResidualBlock {
 public:
  ResidualBlock(std::size_t in_channels, std::size_t out_channels, std::size_t stride, Rng& rng);
  Var forward(const Var& x, bool training);
  void register_params(nn::ParameterSet& set, const std::string& prefix);

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm bn2_;
  bool has_projection_ = false;
  nn::Conv2d projection_;
  nn::BatchNorm projection_bn_;
};

// Residual backbone over single-channel images with a pooled classification
// head and a spatial evidence head emitting 4C channels per location.
class GlobalModel {
 public:
  GlobalModel(const GlobalModelConfig& config, Rng& rng);

  // images: [N, H, W, 1]
  GlobalOutput forward(const Var& images, bool training);
  nn::ParameterSet parameters();
  const GlobalModelConfig& config() const { return config_; }

  nn::Linear classifier;
  nn::Conv2d evidence_hidden;
  nn::Conv2d evidence_out;

 private:
  GlobalModelConfig config_;
  nn::Conv2d stem_;
  nn::BatchNorm stem_bn_;
  std::size_t stem_pools_ = 0;
  std::vector<ResidualBlock> blocks_;
};

}  // namespace ugpl
