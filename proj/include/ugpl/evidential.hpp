#pragma once

#include <filesystem>
#include <span>

#include "ugpl/numerics/autograd.hpp"

namespace ugpl {

inline constexpr double kEvidenceEpsilon = 1e-6;

// Per-location Dirichlet parameters, all shaped [..., C].
struct DirichletParams {
  Var beta;   // softplus(evidence) + eps, the inverse uncertainty
  Var nu;     // softmax mass beliefs, sum to one over classes
  Var alpha;  // beta * nu + 1
};

// Per-location uncertainty, shaped [..., h, w]. Each trailing h x w map is
// min-max normalized on its own.
struct UncertaintyMap {
  Var raw;
  Var normalized;
  double epsilon = kEvidenceEpsilon;
};

// evidence: [..., 4C]. Channels [0, C) feed beta and [C, 2C) feed nu; the
// remaining 2C channels are carried by the head but not consumed here.
DirichletParams evidence_to_dirichlet(const Var& evidence, double epsilon = kEvidenceEpsilon);

// raw = mean over classes of 1/alpha + beta / (alpha (alpha + 1)), then
// (raw - min) / (max - min + eps) per map. Requires rank >= 3 ([h, w, C]).
UncertaintyMap uncertainty_map(const DirichletParams& params, double epsilon = kEvidenceEpsilon);

// Total predictive uncertainty of one Dirichlet:
// sum_c (a_c / S)(1 - a_c / S) / (S + 1) with S = sum_c a_c.
double total_dirichlet_uncertainty(std::span<const double> alpha);

// alpha / S per location.
Var expected_probabilities(const DirichletParams& params);

// Writes an [h, w] map in [0, 1] as 8-bit PGM with value round(255 u).
void write_uncertainty_pgm(const std::filesystem::path& path, const Tensor& map);

}  // namespace ugpl
