#pragma once

#include <vector>

#include "ugpl/nn/layers.hpp"

namespace ugpl::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Coupled L2: weight_decay * p is added to the gradient before the moments.
  double weight_decay = 1e-4;
};

class Adam {
 public:
  Adam(ParameterSet params, AdamOptions options);

  // Applies one update from the accumulated gradients. Parameters without a
  // gradient this step are skipped.
  void step();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::size_t steps() const { return t_; }

 private:
  ParameterSet params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace ugpl::nn
