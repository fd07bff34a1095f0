#pragma once

#include <cstddef>
#include <vector>

#include "ugpl/numerics/autograd.hpp"

// Differentiable tensor ops. Image tensors are channels-last: [N, H, W, C].
// Binary elementwise ops broadcast with numpy rules (right-aligned shapes).
namespace ugpl::ops {

inline Var constant(Tensor t) { return Var(std::move(t), false); }

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

// a * x + b elementwise, for scalar a and b.
Var affine(const Var& x, double a, double b);
inline Var scale(const Var& x, double a) { return affine(x, a, 0.0); }
inline Var add_scalar(const Var& x, double b) { return affine(x, 1.0, b); }
inline Var neg(const Var& x) { return affine(x, -1.0, 0.0); }

Var relu(const Var& x);
Var sigmoid(const Var& x);
// log(1 + e^x), evaluated stably.
Var softplus(const Var& x);
Var exp(const Var& x);
// Throws DomainError if any input is <= 0.
Var log(const Var& x);
// Throws DomainError if any input is < 0.
Var sqrt(const Var& x);
Var square(const Var& x);

// Over the last axis.
Var softmax(const Var& x);
Var log_softmax(const Var& x);

// [m, k] x [k, n] -> [m, n]
Var matmul(const Var& a, const Var& b);
// x [N, in], weight [in, out], bias [out] (bias may be undefined).
Var linear(const Var& x, const Var& weight, const Var& bias);

// x [N, H, W, Cin], weight [kh, kw, Cin, Cout]; zero padding.
Var conv2d(const Var& x, const Var& weight, std::size_t stride, std::size_t padding);
// 2x2 window, stride 2, odd trailing rows/cols dropped.
Var max_pool2x2(const Var& x);
// [N, H, W, C] -> [N, C]
Var global_avg_pool(const Var& x);
// [N, H, W, C] -> [N, 1, 1, C]
Var adaptive_avg_pool1x1(const Var& x);

Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);

Var sum(const Var& x);
Var mean(const Var& x);
Var sum(const Var& x, std::size_t axis, bool keepdim = false);
Var mean(const Var& x, std::size_t axis, bool keepdim = false);
// Gradient is routed to the first extremal element along the axis.
Var max(const Var& x, std::size_t axis, bool keepdim = false);
Var min(const Var& x, std::size_t axis, bool keepdim = false);

// Mean squared difference of two equally shaped tensors (scalar).
Var mse(const Var& a, const Var& b);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}
};

// Normalizes over every axis but the last. Training mode uses batch
// statistics and updates the running estimates; eval mode uses the running
// estimates.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training);

}  // namespace ugpl::ops
