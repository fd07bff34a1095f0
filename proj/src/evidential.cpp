#include "ugpl/evidential.hpp"

#include <stdexcept>

#include "ugpl/data/pgm.hpp"
#include "ugpl/numerics/ops.hpp"

namespace ugpl {

DirichletParams evidence_to_dirichlet(const Var& evidence, double epsilon) {
  const Shape& s = evidence.shape();
  if (s.empty() || s.back() == 0 || s.back() % 4 != 0) {
    throw ShapeError("evidence_to_dirichlet", "last axis must be 4C, got " + shape_str(s));
  }
  if (!evidence.value().all_finite()) throw NonFiniteError("evidence_to_dirichlet: non-finite evidence");
  const std::size_t axis = s.size() - 1;
  const std::size_t c = s.back() / 4;
  DirichletParams p;
  p.beta = ops::add_scalar(ops::softplus(ops::slice(evidence, axis, 0, c)), epsilon);
  p.nu = ops::softmax(ops::slice(evidence, axis, c, 2 * c));
  p.alpha = ops::add_scalar(ops::mul(p.beta, p.nu), 1.0);
  return p;
}

UncertaintyMap uncertainty_map(const DirichletParams& params, double epsilon) {
  const Shape& s = params.alpha.shape();
  if (s.size() < 3) throw ShapeError("uncertainty_map", "expected [..., h, w, C], got " + shape_str(s));
  if (params.beta.shape() != s) throw ShapeError("uncertainty_map", params.beta.shape(), s);
  const Var& alpha = params.alpha;
  Var aleatoric = ops::div(ops::constant(Tensor::scalar(1.0)), alpha);
  Var epistemic = ops::div(params.beta, ops::mul(alpha, ops::add_scalar(alpha, 1.0)));
  UncertaintyMap u;
  u.epsilon = epsilon;
  u.raw = ops::mean(ops::add(aleatoric, epistemic), s.size() - 1);

  const Shape& map_shape = u.raw.shape();
  const std::size_t h = map_shape[map_shape.size() - 2];
  const std::size_t w = map_shape[map_shape.size() - 1];
  const std::size_t maps = u.raw.size() / (h * w);
  Var flat = ops::reshape(u.raw, Shape{maps, h * w});
  Var lo = ops::min(flat, 1, true);
  Var hi = ops::max(flat, 1, true);
  Var normalized = ops::div(ops::sub(flat, lo), ops::add_scalar(ops::sub(hi, lo), epsilon));
  u.normalized = ops::reshape(normalized, map_shape);
  return u;
}

double total_dirichlet_uncertainty(std::span<const double> alpha) {
  if (alpha.empty()) throw std::invalid_argument("total_dirichlet_uncertainty: empty alpha");
  double strength = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw std::invalid_argument("total_dirichlet_uncertainty: alpha must be positive");
    strength += a;
  }
  double total = 0.0;
  for (double a : alpha) {
    const double p = a / strength;
    total += p * (1.0 - p) / (strength + 1.0);
  }
  return total;
}

Var expected_probabilities(const DirichletParams& params) {
  const std::size_t axis = params.alpha.shape().size() - 1;
  return ops::div(params.alpha, ops::sum(params.alpha, axis, true));
}

void write_uncertainty_pgm(const std::filesystem::path& path, const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("write_uncertainty_pgm", "expected [h, w], got " + shape_str(map.shape()));
  write_pgm(path, map);
}

}  // namespace ugpl
