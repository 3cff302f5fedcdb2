#include "layoutdm/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "layoutdm/error.hpp"

namespace layoutdm {

Gradients finite_difference_grad(const ScalarObjective& f, const ParameterStore& params, double h) {
  if (!(h > 0.0)) throw DataError(DataErrorCode::invalid_argument, "finite difference step must be positive");
  ParameterStore probe = params;
  Gradients out = params.zeros_like();
  for (auto& [name, tensor] : probe) {
    Tensor& g = out.get(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + h;
      const double up = f(probe);
      tensor[i] = saved - h;
      const double down = f(probe);
      tensor[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("objective is not finite near " + name + "[" + std::to_string(i) + "]");
      }
      g[i] = (up - down) / (2.0 * h);
    }
  }
  return out;
}

GradientComparison compare_gradients(const Gradients& a, const Gradients& b, double floor) {
  if (!a.same_layout(b)) throw DataError(DataErrorCode::shape_mismatch, "gradient sets differ in layout");
  GradientComparison result;
  auto b_it = b.begin();
  for (auto a_it = a.begin(); a_it != a.end(); ++a_it, ++b_it) {
    const Tensor& x = a_it->second;
    const Tensor& y = b_it->second;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double err = std::abs(x[i] - y[i]);
      const double rel = err / std::max({std::abs(x[i]), std::abs(y[i]), floor});
      result.max_abs_error = std::max(result.max_abs_error, err);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = a_it->first;
      }
    }
  }
  return result;
}

}  // namespace layoutdm
