#include "layoutdm/numerics/adam.hpp"

#include <cmath>

#include "layoutdm/error.hpp"

namespace layoutdm {

void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state) {
  if (!params.same_layout(grads)) {
    throw DataError(DataErrorCode::shape_mismatch, "gradients do not match parameter names/shapes");
  }
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment = params.zeros_like();
    state.second_moment = params.zeros_like();
  }
  if (!params.same_layout(state.first_moment) || !params.same_layout(state.second_moment)) {
    throw DataError(DataErrorCode::shape_mismatch, "optimizer moments do not match parameters");
  }

  const auto& h = state.hyper;
  const std::uint64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));

  auto g_it = grads.begin();
  auto m_it = state.first_moment.begin();
  auto v_it = state.second_moment.begin();
  for (auto p_it = params.begin(); p_it != params.end(); ++p_it, ++g_it, ++m_it, ++v_it) {
    auto p = p_it->second.data();
    auto g = g_it->second.data();
    auto m = m_it->second.data();
    auto v = v_it->second.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      p[i] -= h.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
    }
  }
  state.step = t;
}

}  // namespace layoutdm
