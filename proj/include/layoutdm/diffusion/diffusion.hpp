#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "layoutdm/denoiser/denoiser.hpp"
#include "layoutdm/layout/layout.hpp"
#include "layoutdm/numerics/adam.hpp"
#include "layoutdm/numerics/rng.hpp"

namespace layoutdm {

// Linear variance schedule. Arrays are stored 0-based; the accessors take the
// 1-based step t in [1, T].
struct NoiseSchedule {
  std::size_t steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;      // 1 - beta_t
  std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s
  std::vector<double> sigma;      // sqrt(beta_t)

  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return alpha.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return alpha_bar.at(t - 1); }
  double sigma_at(std::size_t t) const { return sigma.at(t - 1); }
  // Throws DataError(out_of_range) unless 1 <= t <= T.
  void check_step(std::size_t t) const;
};

NoiseSchedule build_schedule(std::size_t steps, double beta_start, double beta_end);

struct DiffusionConfig {
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  // Classifier-free guidance strength; only the plain conditional model (0) exists.
  double guidance_weight = 0.0;
  bool clamp_output = true;

  void validate() const;
  NoiseSchedule schedule() const { return build_schedule(steps, beta_start, beta_end); }
};

void to_json(nlohmann::json& j, const DiffusionConfig& c);
void from_json(const nlohmann::json& j, DiffusionConfig& c);

// sqrt(abar_t) g0 + sqrt(1 - abar_t) eps, elementwise.
Tensor q_sample(const Tensor& g0, std::size_t t, const Tensor& eps, const NoiseSchedule& schedule);
// Batched form over [B, N, 4] with one step per batch row; padded slots are
// left at zero.
Tensor q_sample(const Tensor& g0, std::span<const int> timesteps, const Tensor& eps, const Batch& layout,
                const NoiseSchedule& schedule);

// (1/sqrt(alpha_t)) (g_t - beta_t / sqrt(1 - abar_t) eps_hat)
Tensor posterior_mean(const Tensor& g_t, std::size_t t, const Tensor& eps_hat, const NoiseSchedule& schedule);

// eps_theta(g_t, t, f): maps noised geometry [B,N,4] and per-row steps to
// predicted noise [B,N,4].
using NoisePredictor = std::function<Tensor(const Tensor& g_t, std::span<const int> timesteps, const Batch& cond)>;

NoisePredictor make_noise_predictor(const ParameterStore& params, const DenoiserConfig& config);

// One ancestral step. z ~ N(0, I) over the full [B,N,4] shape is drawn from
// `stream` when t > 1; at t = 1 no noise is drawn. Padded slots keep their
// input values.
Tensor p_sample_step(const Tensor& g_t, std::size_t t, const Batch& cond, const NoisePredictor& predict,
                     const NoiseSchedule& schedule, RngStream& stream);

struct SampleResult {
  Tensor raw;      // [B,N,4], unclamped, zero in padded slots
  Tensor clamped;  // copy clamped to [-1,1] when clamp_output is set
};

// g_T ~ N(0, I), then T reverse steps.
SampleResult sample(const Batch& cond, const NoisePredictor& predict, const NoiseSchedule& schedule,
                    RngStream& stream, const DiffusionConfig& config);

// Squared noise-prediction error, reduced as a mean over valid slots and coordinates.
double simple_loss(const Tensor& eps, const Tensor& eps_hat, const Mask& mask);

struct TrainingStepResult {
  double loss = 0.0;
  std::vector<int> timesteps;  // one per layout
  Tensor noise;                // drawn eps, zero in padded slots
  Tensor predicted;            // eps_hat before the update
};

// Draws t ~ U{1..T} per layout, then eps; noises the batch, evaluates the
// masked mean-squared loss, backpropagates, and applies one Adam update.
TrainingStepResult training_step(const Batch& batch, ParameterStore& params, const DenoiserConfig& config,
                                 AdamState& adam, const NoiseSchedule& schedule, RngStream& stream);

}  // namespace layoutdm
