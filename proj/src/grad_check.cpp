#include "nklm/grad_check.hpp"

#include <cmath>

#include "nklm/errors.hpp"

namespace nklm {

GradCheckReport finite_diff_check(const std::function<double(bool)>& loss, ParamStore& params,
                                  double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_diff_check: eps must be positive");

  params.zero_grads();
  const double base = loss(true);
  if (!std::isfinite(base)) throw OracleError("finite_diff_check: non-finite loss");

  // snapshot analytic grads before we start nudging parameters
  std::map<std::string, Tensor2> analytic;
  for (const auto& [name, e] : params.entries())
    if (e.trainable) analytic.emplace(name, e.grad);

  GradCheckReport report;
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    double* v = e.value.data();
    const Tensor2& ga = analytic.at(name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + eps;
      const double up = loss(false);
      v[i] = keep - eps;
      const double down = loss(false);
      v[i] = keep;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw OracleError("finite_diff_check: non-finite loss while perturbing " + name);
      const double gn = (up - down) / (2.0 * eps);
      const double a = ga.data()[i];
      // The denominator floor keeps near-zero components honest: central
      // differences carry ~|loss|*2^-52/eps of rounding noise, so components
      // smaller than that can only be compared in absolute terms.
      const double rel = std::fabs(a - gn) / std::max(1e-4, std::fabs(a) + std::fabs(gn));
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = gn;
      }
    }
  }
  params.zero_grads();
  return report;
}

}  // namespace nklm
