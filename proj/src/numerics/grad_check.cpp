#include "ugpl/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ugpl/numerics/rng.hpp"

namespace ugpl {
namespace {

// Evaluates the loss, mapping exceptions and non-finite values to NaN.
double evaluate(const std::function<Var()>& loss) {
  try {
    const Var out = loss();
    return out.item();
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  for (std::size_t i = 0; i < limit; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Var()>& loss, const std::vector<NamedVar>& inputs,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  GradCheckReport report;

  for (const auto& [name, v] : inputs) {
    Var handle = v;
    handle.zero_grad();
  }
  Var out;
  try {
    out = loss();
  } catch (const std::exception&) {
    report.non_finite = 1;
    report.entries.push_back({"<forward>", 0, 0.0, 0.0, 0.0, false, false});
    return report;
  }
  if (out.size() != 1) throw ShapeError("grad_check", "loss must be scalar, got " + shape_str(out.shape()));
  backward(out);

  Rng rng(options.sample_seed, "grad_check");
  for (const auto& [name, v] : inputs) {
    Var handle = v;
    const Tensor analytic = handle.has_grad() ? handle.grad() : Tensor(handle.shape(), 0.0);
    for (std::size_t i : pick_indices(handle.size(), options.max_elements_per_input, rng)) {
      double& slot = handle.mutable_value()[i];
      const double saved = slot;
      slot = saved + options.step;
      const double up = evaluate(loss);
      slot = saved - options.step;
      const double down = evaluate(loss);
      slot = saved;

      GradCheckEntry e;
      e.input = name;
      e.index = i;
      e.analytic = analytic[i];
      e.numeric = (up - down) / (2.0 * options.step);
      e.finite = std::isfinite(e.analytic) && std::isfinite(e.numeric);
      if (e.finite) {
        e.rel_error = relative_error(e.analytic, e.numeric, options.floor);
        e.pass = e.rel_error <= options.tol;
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      } else {
        e.rel_error = std::numeric_limits<double>::infinity();
        e.pass = false;
        ++report.non_finite;
      }
      if (e.finite && !e.pass) ++report.failures;
      report.entries.push_back(e);
    }
  }
  return report;
}

GradCheckReport grad_check(const std::function<Var(const Var&)>& f, const Tensor& point, double step, double tol) {
  Var x(point, true);
  GradCheckOptions options;
  options.step = step;
  options.tol = tol;
  return grad_check([&] { return f(x); }, {{"x", x}}, options);
}

}  // namespace ugpl
