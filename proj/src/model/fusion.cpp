#include "ugpl/model/fusion.hpp"

#include <stdexcept>

namespace ugpl {

void FusionConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("FusionConfig: num_classes must be >= 2");
  if (hidden_dim < 1) throw std::invalid_argument("FusionConfig: hidden_dim must be >= 1");
}

Var scalar_uncertainty(const Var& normalized_map) {
  const Shape& s = normalized_map.shape();
  if (s.size() < 2) throw ShapeError("scalar_uncertainty", "expected [..., h, w], got " + shape_str(s));
  const std::size_t hw = s[s.size() - 2] * s[s.size() - 1];
  if (hw == 0) throw ShapeError("scalar_uncertainty", "empty map");
  return ops::mean(ops::reshape(normalized_map, Shape{normalized_map.size() / hw, hw}), 1);
}

Var fuse_logits(const Var& z_global, const Var& z_local, const Var& w_global) {
  if (z_global.shape() != z_local.shape() || z_global.shape().size() != 2) {
    throw ShapeError("fuse", z_global.shape(), z_local.shape());
  }
  const std::size_t batch = z_global.shape()[0];
  if (w_global.shape() != Shape{batch}) throw ShapeError("fuse", w_global.shape(), Shape{batch});
  Var w = ops::reshape(w_global, Shape{batch, 1});
  Var w_local = ops::affine(w, -1.0, 1.0);
  return ops::add(ops::mul(w, z_global), ops::mul(w_local, z_local));
}

FusionNet::FusionNet(const FusionConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  hidden = nn::Linear(config_.num_classes + 1, config_.hidden_dim, rng);
  out = nn::Linear(config_.hidden_dim, 1, rng);
}

Var FusionNet::weight(const Var& z_global, const Var& u_global) const {
  const Shape& s = z_global.shape();
  if (s.size() != 2 || s[1] != config_.num_classes) {
    throw ShapeError("fusion_weight", s, Shape{s.empty() ? 0 : s[0], config_.num_classes});
  }
  if (u_global.shape() != Shape{s[0]}) throw ShapeError("fusion_weight", u_global.shape(), Shape{s[0]});
  Var input = ops::concat({z_global, ops::reshape(u_global, Shape{s[0], 1})}, 1);
  Var w = ops::sigmoid(out.forward(ops::relu(hidden.forward(input))));
  return ops::reshape(w, Shape{s[0]});
}

nn::ParameterSet FusionNet::parameters() const {
  nn::ParameterSet set;
  hidden.register_params(set, "fusion.hidden");
  out.register_params(set, "fusion.out");
  return set;
}

FusionOutput fuse(const Var& z_global, const Var& u_global, const Var& z_local, const FusionNet& net,
                  std::optional<double> injected_weight) {
  if (!z_global.value().all_finite() || !z_local.value().all_finite() || !u_global.value().all_finite()) {
    throw NonFiniteError("fuse: non-finite input");
  }
  FusionOutput out;
  out.u_g = u_global;
  if (injected_weight) {
    out.w_g = ops::constant(Tensor(Shape{z_global.shape().at(0)}, *injected_weight));
  } else {
    out.w_g = net.weight(z_global, u_global);
  }
  out.fused_logits = fuse_logits(z_global, z_local, out.w_g);
  return out;
}

}  // namespace ugpl
