#pragma once

#include <functional>

#include "alignve/param_store.hpp"

namespace alignve {

// Scalar objective over a parameter set. Must build its result from the
// tensors in the set so that tape-bound parameters are tracked.
using ScalarFn = std::function<Tensor<double>(const ParamSet<double>&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients with central differences
// (f(x+h) - f(x-h)) / 2h on every parameter entry. The relative error of one
// entry is |a - n| / max(|a|, |n|, 1e-8). An empty store yields 0.
GradCheckReport finite_difference_report(const ScalarFn& f, ParamStore<double>& params, double h = 1e-5);

inline double finite_difference_check(const ScalarFn& f, ParamStore<double>& params, double h = 1e-5) {
  return finite_difference_report(f, params, h).max_relative_error;
}

}  // namespace alignve
