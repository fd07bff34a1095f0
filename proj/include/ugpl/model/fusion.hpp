#pragma once

#include <cstddef>
#include <optional>

#include "ugpl/nn/layers.hpp"

namespace ugpl {

struct FusionConfig {
  std::size_t num_classes = 3;
  std::size_t hidden_dim = 32;

  void validate() const;
};

struct FusionOutput {
  Var u_g;           // [B]
  Var w_g;           // [B]
  Var fused_logits;  // [B, C]
};

// Mean of each normalized [h, w] map. Input [B, h, w] -> [B], or [h, w] -> [1].
Var scalar_uncertainty(const Var& normalized_map);

// w * z_g + (1 - w) * z_l, per sample. w: [B], logits: [B, C].
Var fuse_logits(const Var& z_global, const Var& z_local, const Var& w_global);

// Two-layer gate: sigmoid(W2 relu(W1 [z_g, u_g] + b1) + b2).
class FusionNet {
 public:
  FusionNet(const FusionConfig& config, Rng& rng);

  // z_global: [B, C], u_global: [B] -> w_g: [B]
  Var weight(const Var& z_global, const Var& u_global) const;
  nn::ParameterSet parameters() const;
  const FusionConfig& config() const { return config_; }

  nn::Linear hidden;
  nn::Linear out;

 private:
  FusionConfig config_;
};

// Predicts w_g (or uses `injected_weight` for every sample) and fuses.
FusionOutput fuse(const Var& z_global, const Var& u_global, const Var& z_local, const FusionNet& net,
                  std::optional<double> injected_weight = std::nullopt);

}  // namespace ugpl
