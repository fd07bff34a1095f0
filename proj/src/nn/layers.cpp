#include "ugpl/nn/layers.hpp"

#include <cmath>

namespace ugpl::nn {

void ParameterSet::add(std::string name, const Var& param) { params_.emplace_back(std::move(name), param); }

void ParameterSet::add_buffer(std::string name, Tensor* buffer) { buffers_.push_back({std::move(name), buffer}); }

void ParameterSet::append(const ParameterSet& other) {
  params_.insert(params_.end(), other.params_.begin(), other.params_.end());
  buffers_.insert(buffers_.end(), other.buffers_.begin(), other.buffers_.end());
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.size();
  return n;
}

void ParameterSet::zero_grad() const {
  for (const auto& [name, p] : params_) {
    Var handle = p;
    handle.zero_grad();
  }
}

void he_normal(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : t.storage()) v = rng.normal(0.0, stddev);
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride_,
               std::size_t padding_, bool with_bias, Rng& rng)
    : stride(stride_), padding(padding_) {
  Tensor w(Shape{kernel, kernel, in_channels, out_channels});
  he_normal(w, kernel * kernel * in_channels, rng);
  weight = Var(std::move(w), true);
  if (with_bias) bias = Var(Tensor(Shape{out_channels}, 0.0), true);
}

Var Conv2d::forward(const Var& x) const {
  Var y = ops::conv2d(x, weight, stride, padding);
  return bias.defined() ? ops::add(y, bias) : y;
}

void Conv2d::register_params(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  if (bias.defined()) set.add(prefix + ".bias", bias);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng) {
  Tensor w(Shape{in_features, out_features});
  he_normal(w, in_features, rng);
  weight = Var(std::move(w), true);
  bias = Var(Tensor(Shape{out_features}, 0.0), true);
}

void Linear::register_params(ParameterSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Tensor(Shape{channels}, 1.0), true), beta(Tensor(Shape{channels}, 0.0), true), state(channels) {}

void BatchNorm::register_params(ParameterSet& set, const std::string& prefix) {
  set.add(prefix + ".gamma", gamma);
  set.add(prefix + ".beta", beta);
  set.add_buffer(prefix + ".running_mean", &state.running_mean);
  set.add_buffer(prefix + ".running_var", &state.running_var);
}

}  // namespace ugpl::nn
