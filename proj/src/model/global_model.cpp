#include "ugpl/model/global_model.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace ugpl {

void GlobalModelConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("GlobalModelConfig: num_classes must be >= 2");
  if (backbone_channels.empty()) throw std::invalid_argument("GlobalModelConfig: backbone_channels is empty");
  if (downsample_factor == 0 || !std::has_single_bit(downsample_factor)) {
    throw std::invalid_argument("GlobalModelConfig: downsample_factor must be a power of two");
  }
  const auto doublings = static_cast<std::size_t>(std::countr_zero(downsample_factor));
  if (doublings + 1 < backbone_channels.size()) {
    throw std::invalid_argument("GlobalModelConfig: downsample_factor " + std::to_string(downsample_factor) +
                                " too small for " + std::to_string(backbone_channels.size()) + " stages");
  }
  if (input_height == 0 || input_width == 0 || input_height % downsample_factor != 0 ||
      input_width % downsample_factor != 0) {
    throw std::invalid_argument("GlobalModelConfig: input size " + std::to_string(input_height) + "x" +
                                std::to_string(input_width) + " not divisible by downsample_factor " +
                                std::to_string(downsample_factor));
  }
  if (feature_dim != backbone_channels.back()) {
    throw std::invalid_argument("GlobalModelConfig: feature_dim must equal the last backbone width");
  }
  if (evidence_hidden == 0) throw std::invalid_argument("GlobalModelConfig: evidence_hidden must be positive");
}

ResidualBlock::ResidualBlock(std::size_t in_channels, std::size_t out_channels, std::size_t stride, Rng& rng)
    : conv1_(in_channels, out_channels, 3, stride, 1, false, rng),
      bn1_(out_channels),
      conv2_(out_channels, out_channels, 3, 1, 1, false, rng),
      bn2_(out_channels),
      has_projection_(stride != 1 || in_channels != out_channels) {
  if (has_projection_) {
    projection_ = nn::Conv2d(in_channels, out_channels, 1, stride, 0, false, rng);
    projection_bn_ = nn::BatchNorm(out_channels);
  }
}

Var ResidualBlock::forward(const Var& x, bool training) {
  Var y = ops::relu(bn1_.forward(conv1_.forward(x), training));
  y = bn2_.forward(conv2_.forward(y), training);
  Var shortcut = has_projection_ ? projection_bn_.forward(projection_.forward(x), training) : x;
  return ops::relu(ops::add(y, shortcut));
}

void ResidualBlock::register_params(nn::ParameterSet& set, const std::string& prefix) {
  conv1_.register_params(set, prefix + ".conv1");
  bn1_.register_params(set, prefix + ".bn1");
  conv2_.register_params(set, prefix + ".conv2");
  bn2_.register_params(set, prefix + ".bn2");
  if (has_projection_) {
    projection_.register_params(set, prefix + ".proj");
    projection_bn_.register_params(set, prefix + ".proj_bn");
  }
}

GlobalModel::GlobalModel(const GlobalModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t stages = config_.backbone_channels.size();
  const auto doublings = static_cast<std::size_t>(std::countr_zero(config_.downsample_factor));
  // Stages after the first halve the resolution; the stem takes the rest.
  const std::size_t stem_doublings = doublings - (stages - 1);
  const std::size_t c0 = config_.backbone_channels.front();
  stem_ = nn::Conv2d(1, c0, 3, stem_doublings > 0 ? 2 : 1, 1, false, rng);
  stem_bn_ = nn::BatchNorm(c0);
  stem_pools_ = stem_doublings > 1 ? stem_doublings - 1 : 0;

  std::size_t in = c0;
  blocks_.reserve(stages * 2);
  for (std::size_t s = 0; s < stages; ++s) {
    const std::size_t out = config_.backbone_channels[s];
    blocks_.emplace_back(in, out, s == 0 ? 1 : 2, rng);
    blocks_.emplace_back(out, out, 1, rng);
    in = out;
  }

  const std::size_t c = config_.num_classes;
  classifier = nn::Linear(config_.feature_dim, c, rng);
  evidence_hidden = nn::Conv2d(config_.feature_dim, config_.evidence_hidden, 3, 1, 1, true, rng);
  evidence_out = nn::Conv2d(config_.evidence_hidden, 4 * c, 3, 1, 1, true, rng);
}

GlobalOutput GlobalModel::forward(const Var& images, bool training) {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != config_.input_height || s[2] != config_.input_width || s[3] != 1) {
    throw ShapeError("global_forward", "expected [N," + std::to_string(config_.input_height) + "," +
                                           std::to_string(config_.input_width) + ",1], got " + shape_str(s));
  }
  if (!images.value().all_finite()) throw NonFiniteError("global_forward: non-finite input");

  Var x = ops::relu(stem_bn_.forward(stem_.forward(images), training));
  for (std::size_t i = 0; i < stem_pools_; ++i) x = ops::max_pool2x2(x);
  for (ResidualBlock& block : blocks_) x = block.forward(x, training);

  GlobalOutput out;
  out.features = x;
  out.logits = classifier.forward(ops::global_avg_pool(x));
  out.evidence = evidence_out.forward(ops::relu(evidence_hidden.forward(x)));
  return out;
}

nn::ParameterSet GlobalModel::parameters() {
  nn::ParameterSet set;
  stem_.register_params(set, "global.stem");
  stem_bn_.register_params(set, "global.stem_bn");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].register_params(set, "global.block" + std::to_string(i));
  }
  classifier.register_params(set, "global.classifier");
  evidence_hidden.register_params(set, "global.evidence_hidden");
  evidence_out.register_params(set, "global.evidence_out");
  return set;
}

}  // namespace ugpl
