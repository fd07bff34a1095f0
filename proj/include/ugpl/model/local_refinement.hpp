#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ugpl/nn/layers.hpp"

namespace ugpl {

struct LocalNetConfig {
  std::size_t num_classes = 3;
  std::array<std::size_t, 4> encoder_channels{64, 128, 256, 256};
  std::size_t feature_dim = 256;
  std::size_t cls_hidden = 128;
  std::size_t conf_hidden = 64;
  double epsilon = 1e-6;

  void validate() const;
};

// Four 2x2 pools need at least this many pixels per side.
inline constexpr std::size_t kMinLocalPatchSize = 16;

struct LocalOutput {
  Var patch_logits;       // [B, K, C]
  Var confidences;        // [B, K], each in (0, 1)
  Var aggregated_logits;  // [B, C]
};

// sum_k c_k z_k / (sum_k c_k + eps). logits: [B, K, C], confidences: [B, K].
Var aggregate_local(const Var& logits, const Var& confidences, double epsilon);

// Patch encoder (conv3x3-BN-ReLU-maxpool blocks, adaptive average pool)
// with a classification head and a sigmoid confidence head.
class LocalNet {
 public:
  LocalNet(const LocalNetConfig& config, Rng& rng);

  // patches: [B * K, P, P, 1], sample-major. Throws std::invalid_argument
  // when P < kMinLocalPatchSize.
  LocalOutput forward(const Var& patches, std::size_t batch, std::size_t patches_per_sample, bool training);
  // Encoder output f_k: [B * K, feature_dim].
  Var encode(const Var& patches, bool training);

  nn::ParameterSet parameters();
  const LocalNetConfig& config() const { return config_; }

  nn::Linear cls_hidden;
  nn::Linear cls_out;
  nn::Linear conf_hidden;
  nn::Linear conf_out;

 private:
  LocalNetConfig config_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::BatchNorm> norms_;
};

}  // namespace ugpl
