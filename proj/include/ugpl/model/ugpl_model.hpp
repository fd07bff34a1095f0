#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ugpl/evidential.hpp"
#include "ugpl/losses.hpp"
#include "ugpl/model/fusion.hpp"
#include "ugpl/model/global_model.hpp"
#include "ugpl/model/local_refinement.hpp"
#include "ugpl/patch_extraction.hpp"

namespace ugpl {

enum class AblationMode { kFull, kGlobalOnly, kNoUg, kFixedPatches };

std::string to_string(AblationMode mode);
AblationMode ablation_from_string(const std::string& s);
const std::vector<AblationMode>& all_ablation_modes();

struct UgplConfig {
  GlobalModelConfig global;
  LocalNetConfig local;
  FusionConfig fusion;
  PatchExtractConfig patches;

  // Checks every part plus cross-part agreement (class counts, patch fit).
  void validate() const;
};

struct Prediction {
  GlobalOutput global;
  DirichletParams dirichlet;
  UncertaintyMap uncertainty;
  std::vector<PatchSet> patch_sets;  // empty in global_only mode
  bool has_local = false;
  LocalOutput local;
  Var u_g;           // [B]
  Var w_g;           // [B]; constant 1 in global_only mode
  Var fused_logits;  // [B, C]
};

// Top-left corners for fixed_patches mode. Square K (1, 4, 9, ...) uses a
// sqrt(K) x sqrt(K) grid of cell centers; other K are spaced along the main
// diagonal, one per 1/K segment. Corners are clamped into the image.
std::vector<PatchCoord> fixed_patch_grid(std::size_t height, std::size_t width, std::size_t patch_size,
                                         std::size_t num_patches);

class UgplModel {
 public:
  UgplModel(const UgplConfig& config, Rng& rng);

  // images: [B, H, W, 1] model-ready (normalized) inputs. sample_seeds holds
  // one seed per image for fallback draws and the no_ug random map.
  Prediction forward(const Tensor& images, AblationMode mode, bool training,
                     std::span<const std::uint64_t> sample_seeds,
                     std::optional<double> injected_weight = std::nullopt);

  nn::ParameterSet parameters();
  const UgplConfig& config() const { return config_; }

  GlobalModel global;
  LocalNet local;
  FusionNet fusion;

 private:
  UgplConfig config_;
};

// Loss components for one forward pass. global_only keeps only the fused term
// (on the global logits) and the uncertainty term.
LossTerms loss_terms(const Prediction& prediction, std::span<const std::size_t> labels, AblationMode mode);

}  // namespace ugpl
