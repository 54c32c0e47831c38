#pragma once

#include <functional>
#include <string>

#include "nklm/param_store.hpp"

namespace nklm {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0, numeric = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients against central finite differences.
//
// `loss(with_grad)` must return the scalar loss for the current parameter
// values; when with_grad it must also accumulate analytic gradients into
// `params` (grads are zeroed here beforehand). The loss must be a pure,
// repeatable function of the parameters.
//
// Relative error per component: |ga - gn| / max(1e-4, |ga| + |gn|). The floor
// keeps near-zero gradients from amplifying central-difference rounding noise
// (~|loss|*2^-52/eps), so it doubles as an absolute tolerance of 1e-4 * tol.
// Throws OracleError if any loss evaluation is non-finite.
GradCheckReport finite_diff_check(const std::function<double(bool)>& loss, ParamStore& params,
                                  double eps = 1e-5);

}  // namespace nklm
