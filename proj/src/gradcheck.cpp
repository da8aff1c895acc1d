#include "alignve/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace alignve {

GradCheckReport finite_difference_report(const ScalarFn& f, ParamStore<double>& params, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  GradCheckReport report;
  if (params.empty()) return report;

  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    const ParamSet<double> bound = params.bind(&tape);
    const Tensor<double> loss = f(bound);
    analytic = bound.gradients(tape.backward(loss));
  }

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params.at(p).data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = f(params.bind(nullptr)).item();
      values[i] = saved - h;
      const double minus = f(params.bind(nullptr)).item();
      values[i] = saved;

      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (!std::isfinite(rel)) throw NumericalError("non-finite gradient at " + params.name(p));
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = params.name(p);
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace alignve
