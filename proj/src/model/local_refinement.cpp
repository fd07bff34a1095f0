#include "ugpl/model/local_refinement.hpp"

#include <stdexcept>
#include <string>

namespace ugpl {

void LocalNetConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("LocalNetConfig: num_classes must be >= 2");
  for (std::size_t i = 1; i < encoder_channels.size(); ++i) {
    if (encoder_channels[i] < encoder_channels[i - 1]) {
      throw std::invalid_argument("LocalNetConfig: encoder_channels must be non-decreasing");
    }
  }
  if (feature_dim != encoder_channels.back()) {
    throw std::invalid_argument("LocalNetConfig: feature_dim must equal the last encoder width");
  }
  if (cls_hidden == 0 || conf_hidden == 0) throw std::invalid_argument("LocalNetConfig: hidden sizes must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("LocalNetConfig: epsilon must be non-negative");
}

Var aggregate_local(const Var& logits, const Var& confidences, double epsilon) {
  const Shape& s = logits.shape();
  if (s.size() != 3 || confidences.shape() != Shape{s[0], s[1]}) {
    throw ShapeError("aggregate_local", s, confidences.shape());
  }
  if (s[1] == 0) throw ShapeError("aggregate_local", "need at least one patch");
  Var weights = ops::reshape(confidences, Shape{s[0], s[1], 1});
  Var numerator = ops::sum(ops::mul(weights, logits), 1);
  Var denominator = ops::add_scalar(ops::sum(confidences, 1, true), epsilon);
  return ops::div(numerator, denominator);
}

LocalNet::LocalNet(const LocalNetConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  std::size_t in = 1;
  for (std::size_t out : config_.encoder_channels) {
    convs_.emplace_back(in, out, 3, 1, 1, false, rng);
    norms_.emplace_back(out);
    in = out;
  }
  cls_hidden = nn::Linear(config_.feature_dim, config_.cls_hidden, rng);
  cls_out = nn::Linear(config_.cls_hidden, config_.num_classes, rng);
  conf_hidden = nn::Linear(config_.feature_dim, config_.conf_hidden, rng);
  conf_out = nn::Linear(config_.conf_hidden, 1, rng);
}

Var LocalNet::encode(const Var& patches, bool training) {
  const Shape& s = patches.shape();
  if (s.size() != 4 || s[3] != 1) throw ShapeError("local_forward", "expected [B*K, P, P, 1], got " + shape_str(s));
  if (s[1] < kMinLocalPatchSize || s[2] < kMinLocalPatchSize) {
    throw std::invalid_argument("local_forward: patch size " + std::to_string(s[1]) + " is below " +
                                std::to_string(kMinLocalPatchSize) + "; four 2x2 max-pool stages would leave no pixels");
  }
  Var x = patches;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = ops::max_pool2x2(ops::relu(norms_[i].forward(convs_[i].forward(x), training)));
  }
  return ops::reshape(ops::adaptive_avg_pool1x1(x), Shape{s[0], config_.feature_dim});
}

LocalOutput LocalNet::forward(const Var& patches, std::size_t batch, std::size_t patches_per_sample, bool training) {
  if (patches_per_sample == 0) throw std::invalid_argument("local_forward: K must be >= 1");
  if (patches.shape().empty() || patches.shape()[0] != batch * patches_per_sample) {
    throw ShapeError("local_forward", "leading dim must be B*K = " + std::to_string(batch * patches_per_sample) +
                                          ", got " + shape_str(patches.shape()));
  }
  const Var features = encode(patches, training);
  LocalOutput out;
  Var logits = cls_out.forward(ops::relu(cls_hidden.forward(features)));
  Var conf = ops::sigmoid(conf_out.forward(ops::relu(conf_hidden.forward(features))));
  out.patch_logits = ops::reshape(logits, Shape{batch, patches_per_sample, config_.num_classes});
  out.confidences = ops::reshape(conf, Shape{batch, patches_per_sample});
  out.aggregated_logits = aggregate_local(out.patch_logits, out.confidences, config_.epsilon);
  return out;
}

nn::ParameterSet LocalNet::parameters() {
  nn::ParameterSet set;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const std::string prefix = "local.block" + std::to_string(i);
    convs_[i].register_params(set, prefix + ".conv");
    norms_[i].register_params(set, prefix + ".bn");
  }
  cls_hidden.register_params(set, "local.cls_hidden");
  cls_out.register_params(set, "local.cls_out");
  conf_hidden.register_params(set, "local.conf_hidden");
  conf_out.register_params(set, "local.conf_out");
  return set;
}

}  // namespace ugpl
