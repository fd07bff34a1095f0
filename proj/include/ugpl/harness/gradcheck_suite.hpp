#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugpl/model/ugpl_model.hpp"
#include "ugpl/numerics/grad_check.hpp"

namespace ugpl {

struct GradCheckCase {
  std::string name;  // loss component, or "total"
  GradCheckReport report;
  double seconds = 0.0;
};

// Small end-to-end instance used for whole-pipeline gradient checks.
UgplConfig gradcheck_model_config();

// Checks every loss component and the weighted total against central
// differences on a seeded 1-sample instance, w.r.t. all trainable parameters
// (a seeded subset of each tensor when max_elements_per_input > 0).
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& options, std::uint64_t seed = 7);

}  // namespace ugpl
