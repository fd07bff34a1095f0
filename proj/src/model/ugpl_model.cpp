#include "ugpl/model/ugpl_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugpl {
namespace {

std::size_t clamp_corner(double center, std::size_t patch_size, std::size_t extent) {
  const double corner = std::floor(center - static_cast<double>(patch_size) / 2.0);
  const double max_corner = static_cast<double>(extent - patch_size);
  return static_cast<std::size_t>(std::clamp(corner, 0.0, max_corner));
}

Tensor sample_slice(const Tensor& batch, std::size_t index) {
  const Shape& s = batch.shape();
  const std::size_t n = s[1] * s[2];
  std::vector<double> values(batch.data().begin() + static_cast<std::ptrdiff_t>(index * n),
                             batch.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * n));
  return Tensor(Shape{s[1], s[2]}, std::move(values));
}

}  // namespace

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull: return "full";
    case AblationMode::kGlobalOnly: return "global_only";
    case AblationMode::kNoUg: return "no_ug";
    case AblationMode::kFixedPatches: return "fixed_patches";
  }
  return "full";
}

AblationMode ablation_from_string(const std::string& s) {
  for (AblationMode m : all_ablation_modes()) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown ablation mode '" + s + "'");
}

const std::vector<AblationMode>& all_ablation_modes() {
  static const std::vector<AblationMode> modes{AblationMode::kFull, AblationMode::kGlobalOnly, AblationMode::kNoUg,
                                               AblationMode::kFixedPatches};
  return modes;
}

void UgplConfig::validate() const {
  global.validate();
  local.validate();
  fusion.validate();
  patches.validate(global.input_height, global.input_width);
  if (local.num_classes != global.num_classes || fusion.num_classes != global.num_classes) {
    throw std::invalid_argument("num_classes must agree across global, local and fusion configs");
  }
}

std::vector<PatchCoord> fixed_patch_grid(std::size_t height, std::size_t width, std::size_t patch_size,
                                         std::size_t num_patches) {
  if (patch_size == 0 || patch_size > std::min(height, width) || num_patches == 0) {
    throw std::invalid_argument("fixed_patch_grid: invalid patch size or count");
  }
  std::vector<PatchCoord> coords;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(num_patches))));
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  if (side * side == num_patches) {
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const double cy = (static_cast<double>(r) + 0.5) * h / static_cast<double>(side);
        const double cx = (static_cast<double>(c) + 0.5) * w / static_cast<double>(side);
        coords.push_back({clamp_corner(cx, patch_size, width), clamp_corner(cy, patch_size, height)});
      }
    }
  } else {
    for (std::size_t k = 0; k < num_patches; ++k) {
      const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(num_patches);
      coords.push_back({clamp_corner(t * w, patch_size, width), clamp_corner(t * h, patch_size, height)});
    }
  }
  return coords;
}

UgplModel::UgplModel(const UgplConfig& config, Rng& rng)
    : global(config.global, rng), local(config.local, rng), fusion(config.fusion, rng), config_(config) {
  config_.validate();
}

Prediction UgplModel::forward(const Tensor& images, AblationMode mode, bool training,
                              std::span<const std::uint64_t> sample_seeds, std::optional<double> injected_weight) {
  const Shape& s = images.shape();
  if (s.size() != 4) throw ShapeError("ugpl_forward", "expected [B, H, W, 1], got " + shape_str(s));
  const std::size_t batch = s[0];
  if (sample_seeds.size() != batch) throw std::invalid_argument("ugpl_forward: need one seed per image");

  Prediction out;
  out.global = global.forward(ops::constant(images), training);
  out.dirichlet = evidence_to_dirichlet(out.global.evidence);
  out.uncertainty = uncertainty_map(out.dirichlet);
  out.u_g = scalar_uncertainty(out.uncertainty.normalized);

  if (mode == AblationMode::kGlobalOnly) {
    out.w_g = ops::constant(Tensor(Shape{batch}, 1.0));
    out.fused_logits = out.global.logits;
    return out;
  }

  const PatchExtractConfig& pc = config_.patches;
  const std::size_t p = pc.patch_size;
  const std::size_t k = pc.num_patches;
  const std::size_t enc = std::max(p, kMinLocalPatchSize);
  const std::size_t h = out.uncertainty.normalized.shape()[1];
  const std::size_t w = out.uncertainty.normalized.shape()[2];
  const Tensor& maps = out.uncertainty.normalized.value();
  Tensor patches(Shape{batch * k, enc, enc, 1});
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor image = sample_slice(images, b).reshaped(Shape{s[1], s[2], 1});
    PatchSet set;
    if (mode == AblationMode::kFixedPatches) {
      for (const PatchCoord& c : fixed_patch_grid(s[1], s[2], p, k)) {
        set.coords.push_back(c);
        set.fallback_used.push_back(false);
        set.scores.push_back(0.0);
        set.patches.push_back(crop_patch(image, static_cast<std::ptrdiff_t>(c.x), static_cast<std::ptrdiff_t>(c.y), p));
      }
    } else {
      Tensor map = sample_slice(maps, b);
      if (mode == AblationMode::kNoUg) {
        Rng map_rng(sample_seeds[b], "no_ug_map");
        map = Tensor(Shape{h, w});
        for (std::size_t i = 0; i < map.size(); ++i) map[i] = map_rng.uniform();
      }
      Rng patch_rng(sample_seeds[b], "patches");
      set = extract_patches(image, map, pc, patch_rng);
    }
    for (std::size_t j = 0; j < k; ++j) {
      const Tensor patch = enc == p ? set.patches[j] : resize_bilinear(set.patches[j], enc, enc);
      std::copy(patch.data().begin(), patch.data().end(),
                patches.data().begin() + static_cast<std::ptrdiff_t>((b * k + j) * enc * enc));
    }
    out.patch_sets.push_back(std::move(set));
  }

  out.has_local = true;
  out.local = local.forward(ops::constant(std::move(patches)), batch, k, training);
  FusionOutput fused = fuse(out.global.logits, out.u_g, out.local.aggregated_logits, fusion, injected_weight);
  out.w_g = fused.w_g;
  out.fused_logits = fused.fused_logits;
  return out;
}

nn::ParameterSet UgplModel::parameters() {
  nn::ParameterSet set = global.parameters();
  set.append(local.parameters());
  set.append(fusion.parameters());
  return set;
}

LossTerms loss_terms(const Prediction& prediction, std::span<const std::size_t> labels, AblationMode mode) {
  LossTerms terms;
  const Tensor cmap = correctness_map(prediction.dirichlet, labels);
  terms.uncertainty = uncertainty_loss(prediction.uncertainty.normalized, cmap);
  if (mode == AblationMode::kGlobalOnly || !prediction.has_local) {
    terms.fused = ce_loss(prediction.global.logits, labels);
    return terms;
  }
  const LocalOutput& local = prediction.local;
  terms.fused = ce_loss(prediction.fused_logits, labels);
  terms.global = ce_loss(prediction.global.logits, labels);
  terms.local = local_ce_loss(local.patch_logits, labels);
  terms.consistency = consistency_loss(local.patch_logits, local.confidences, prediction.global.logits);
  terms.confidence = confidence_loss(local.confidences, local.patch_logits, labels);
  terms.diversity = diversity_loss(local.patch_logits);
  return terms;
}

}  // namespace ugpl
