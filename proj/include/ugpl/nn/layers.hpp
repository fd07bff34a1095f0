#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ugpl/numerics/grad_check.hpp"
#include "ugpl/numerics/ops.hpp"
#include "ugpl/numerics/rng.hpp"

namespace ugpl::nn {

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

// Flat, ordered view of a model's trainable parameters and state buffers.
// Order is registration order and defines checkpoint layout.
class ParameterSet {
 public:
  void add(std::string name, const Var& param);
  void add_buffer(std::string name, Tensor* buffer);
  void append(const ParameterSet& other);

  const std::vector<NamedVar>& params() const { return params_; }
  const std::vector<NamedBuffer>& buffers() const { return buffers_; }
  std::size_t scalar_count() const;
  void zero_grad() const;

 private:
  std::vector<NamedVar> params_;
  std::vector<NamedBuffer> buffers_;
};

void he_normal(Tensor& t, std::size_t fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding, bool bias, Rng& rng);

  Var forward(const Var& x) const;
  void register_params(ParameterSet& set, const std::string& prefix) const;

  Var weight;
  Var bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  Var forward(const Var& x) const { return ops::linear(x, weight, bias); }
  void register_params(ParameterSet& set, const std::string& prefix) const;

  Var weight;  // [in, out]
  Var bias;    // [out]
};

class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  Var forward(const Var& x, bool training) { return ops::batch_norm(x, gamma, beta, state, training); }
  void register_params(ParameterSet& set, const std::string& prefix);

  Var gamma;
  Var beta;
  ops::BatchNormState state;
};

}  // namespace ugpl::nn
