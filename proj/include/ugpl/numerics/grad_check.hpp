#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ugpl/numerics/autograd.hpp"

namespace ugpl {

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // Denominator floor of the relative error. Below it the comparison is
  // effectively absolute: |analytic - numeric| <= tol * floor.
  double floor = 1e-6;
  // 0 checks every element; otherwise a seeded sample of this many per input.
  std::size_t max_elements_per_input = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckEntry {
  std::string input;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool finite = true;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::size_t failures = 0;
  std::size_t non_finite = 0;
  bool passed() const { return failures == 0 && non_finite == 0; }
};

using NamedVar = std::pair<std::string, Var>;

// Compares backward() against central differences. `loss` must rebuild the
// graph from the current values of `inputs`, which are perturbed in place
// and restored afterwards.
GradCheckReport grad_check(const std::function<Var()>& loss, const std::vector<NamedVar>& inputs,
                           const GradCheckOptions& options = {});

// Single-input form: checks f at `point`.
GradCheckReport grad_check(const std::function<Var(const Var&)>& f, const Tensor& point, double step, double tol);

double relative_error(double analytic, double numeric, double floor);

}  // namespace ugpl
