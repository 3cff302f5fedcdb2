#pragma once

#include <functional>

#include "layoutdm/numerics/parameters.hpp"

namespace layoutdm {

using ScalarObjective = std::function<double(const ParameterStore&)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate
// of every parameter. Throws NumericError on a non-finite evaluation.
Gradients finite_difference_grad(const ScalarObjective& f, const ParameterStore& params, double h);

struct GradientComparison {
  double max_abs_error = 0.0;
  // max |a-b| / max(|a|, |b|, floor) over all coordinates
  double max_rel_error = 0.0;
  std::string worst_parameter;
};

GradientComparison compare_gradients(const Gradients& a, const Gradients& b, double floor = 1e-6);

}  // namespace layoutdm
