#pragma once

#include <cstdint>

#include "layoutdm/numerics/parameters.hpp"

namespace layoutdm {

struct AdamHyperparameters {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamHyperparameters&, const AdamHyperparameters&) = default;
};

// First/second moment estimates mirror the parameter store; they are created
// as zeros on the first step.
struct AdamState {
  AdamHyperparameters hyper;
  std::uint64_t step = 0;
  ParameterStore first_moment;
  ParameterStore second_moment;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update applied in place. Throws DataError when the
// gradient or moment layout does not match `params`.
void adam_step(ParameterStore& params, const Gradients& grads, AdamState& state);

}  // namespace layoutdm
