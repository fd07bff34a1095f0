#include "ugpl/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ugpl::nn {

Adam::Adam(ParameterSet params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.lr >= 0.0)) throw std::invalid_argument("Adam: lr must be >= 0");
  for (const auto& [name, p] : params_.params()) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const auto& params = params_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var p = params[i].second;
    if (!p.has_grad()) continue;
    const Tensor& g = p.grad();
    Tensor& w = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double grad = g[j] + options_.weight_decay * w[j];
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * grad;
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * grad * grad;
      const double denom = std::sqrt(v[j] / bc2) + options_.eps;
      w[j] -= options_.lr * (m[j] / bc1) / denom;
    }
  }
}

}  // namespace ugpl::nn
