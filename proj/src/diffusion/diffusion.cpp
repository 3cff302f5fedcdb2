#include "layoutdm/diffusion/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "layoutdm/error.hpp"

namespace layoutdm {

void NoiseSchedule::check_step(std::size_t t) const {
  if (t < 1 || t > steps) {
    throw DataError(DataErrorCode::out_of_range,
                    "diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
  }
}

NoiseSchedule build_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 2) throw DataError(DataErrorCode::invalid_argument, "schedule needs at least 2 steps");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw DataError(DataErrorCode::invalid_argument, "schedule needs 0 < beta_start < beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  s.sigma.resize(steps);
  const double span = beta_end - beta_start;
  double running = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    s.beta[i] = i + 1 == steps ? beta_end
                               : beta_start + span * static_cast<double>(i) / static_cast<double>(steps - 1);
    s.alpha[i] = 1.0 - s.beta[i];
    running *= s.alpha[i];
    s.alpha_bar[i] = running;
    s.sigma[i] = std::sqrt(s.beta[i]);
  }
  return s;
}

void DiffusionConfig::validate() const {
  if (guidance_weight != 0.0) {
    throw DataError(DataErrorCode::invalid_argument, "only guidance weight 0 is supported");
  }
  build_schedule(steps, beta_start, beta_end);
}

void to_json(nlohmann::json& j, const DiffusionConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"beta_start", c.beta_start},
                     {"beta_end", c.beta_end},
                     {"guidance_weight", c.guidance_weight},
                     {"clamp_output", c.clamp_output}};
}

void from_json(const nlohmann::json& j, DiffusionConfig& c) {
  for (const auto& [key, _] : j.items()) {
    if (key != "steps" && key != "beta_start" && key != "beta_end" && key != "guidance_weight" &&
        key != "clamp_output") {
      throw DataError(DataErrorCode::unknown_field, "unknown diffusion setting '" + key + "'");
    }
  }
  c.steps = j.value("steps", c.steps);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  c.guidance_weight = j.value("guidance_weight", c.guidance_weight);
  c.clamp_output = j.value("clamp_output", c.clamp_output);
}

Tensor q_sample(const Tensor& g0, std::size_t t, const Tensor& eps, const NoiseSchedule& schedule) {
  schedule.check_step(t);
  if (g0.shape() != eps.shape()) throw DataError(DataErrorCode::shape_mismatch, "q_sample: g0 and eps shapes differ");
  const double a = std::sqrt(schedule.alpha_bar_at(t));
  const double b = std::sqrt(1.0 - schedule.alpha_bar_at(t));
  Tensor out(g0.shape());
  for (std::size_t i = 0; i < g0.size(); ++i) out[i] = a * g0[i] + b * eps[i];
  return out;
}

Tensor q_sample(const Tensor& g0, std::span<const int> timesteps, const Tensor& eps, const Batch& layout,
                const NoiseSchedule& schedule) {
  const std::size_t B = layout.size, N = layout.max_elements;
  if (g0.size() != B * N * 4 || eps.size() != g0.size()) {
    throw DataError(DataErrorCode::shape_mismatch, "q_sample: tensors do not match the batch");
  }
  if (timesteps.size() != B) throw DataError(DataErrorCode::shape_mismatch, "q_sample: need one step per layout");
  Tensor out(Shape{B, N, 4});
  for (std::size_t b = 0; b < B; ++b) {
    const auto t = static_cast<std::size_t>(std::max(timesteps[b], 0));
    schedule.check_step(t);
    const double a = std::sqrt(schedule.alpha_bar_at(t));
    const double s = std::sqrt(1.0 - schedule.alpha_bar_at(t));
    for (std::size_t n = 0; n < N; ++n) {
      if (!layout.valid(b, n)) continue;
      const std::size_t base = (b * N + n) * 4;
      for (std::size_t c = 0; c < 4; ++c) out[base + c] = a * g0[base + c] + s * eps[base + c];
    }
  }
  return out;
}

Tensor posterior_mean(const Tensor& g_t, std::size_t t, const Tensor& eps_hat, const NoiseSchedule& schedule) {
  schedule.check_step(t);
  if (g_t.shape() != eps_hat.shape()) {
    throw DataError(DataErrorCode::shape_mismatch, "posterior_mean: g_t and eps_hat shapes differ");
  }
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha_at(t));
  const double coef = schedule.beta_at(t) / std::sqrt(1.0 - schedule.alpha_bar_at(t));
  Tensor out(g_t.shape());
  for (std::size_t i = 0; i < g_t.size(); ++i) out[i] = inv_sqrt_alpha * (g_t[i] - coef * eps_hat[i]);
  return out;
}

NoisePredictor make_noise_predictor(const ParameterStore& params, const DenoiserConfig& config) {
  return [&params, config](const Tensor& g_t, std::span<const int> timesteps, const Batch& cond) {
    return denoise(g_t, timesteps, cond, params, config);
  };
}

Tensor p_sample_step(const Tensor& g_t, std::size_t t, const Batch& cond, const NoisePredictor& predict,
                     const NoiseSchedule& schedule, RngStream& stream) {
  schedule.check_step(t);
  const std::size_t B = cond.size, N = cond.max_elements;
  if (g_t.size() != B * N * 4) throw DataError(DataErrorCode::shape_mismatch, "p_sample_step: g_t does not match batch");
  const std::vector<int> steps(B, static_cast<int>(t));
  const Tensor eps_hat = predict(g_t, steps, cond);
  if (eps_hat.size() != g_t.size()) throw DataError(DataErrorCode::shape_mismatch, "predictor output shape");
  Tensor next = posterior_mean(g_t.reshaped({B, N, 4}), t, eps_hat.reshaped({B, N, 4}), schedule);
  if (t > 1) {
    const Tensor z = seeded_gaussian(Shape{B, N, 4}, stream);
    const double sigma = schedule.sigma_at(t);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += sigma * z[i];
  }
  for (std::size_t slot = 0; slot < B * N; ++slot) {
    if (cond.mask[slot]) continue;
    for (std::size_t c = 0; c < 4; ++c) next[slot * 4 + c] = g_t[slot * 4 + c];
  }
  next.require_finite("reverse diffusion step " + std::to_string(t));
  return next;
}

SampleResult sample(const Batch& cond, const NoisePredictor& predict, const NoiseSchedule& schedule,
                    RngStream& stream, const DiffusionConfig& config) {
  config.validate();
  const std::size_t B = cond.size, N = cond.max_elements;
  Tensor g = seeded_gaussian(Shape{B, N, 4}, stream);
  for (std::size_t slot = 0; slot < B * N; ++slot) {
    if (!cond.mask[slot]) std::fill(g.row(slot).begin(), g.row(slot).end(), 0.0);
  }
  for (std::size_t t = schedule.steps; t >= 1; --t) g = p_sample_step(g, t, cond, predict, schedule, stream);
  SampleResult result{g, g};
  if (config.clamp_output) {
    for (double& v : result.clamped.data()) v = std::clamp(v, -1.0, 1.0);
  }
  return result;
}

double simple_loss(const Tensor& eps, const Tensor& eps_hat, const Mask& mask) {
  if (eps.size() != eps_hat.size() || eps.size() != mask.size() * 4) {
    throw DataError(DataErrorCode::shape_mismatch, "simple_loss: shapes");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t slot = 0; slot < mask.size(); ++slot) {
    if (!mask[slot]) continue;
    for (std::size_t c = 0; c < 4; ++c) {
      const double e = eps[slot * 4 + c] - eps_hat[slot * 4 + c];
      total += e * e;
    }
    count += 4;
  }
  if (count == 0) throw DataError(DataErrorCode::invalid_argument, "simple_loss: no valid slots");
  return total / static_cast<double>(count);
}

TrainingStepResult training_step(const Batch& batch, ParameterStore& params, const DenoiserConfig& config,
                                 AdamState& adam, const NoiseSchedule& schedule, RngStream& stream) {
  const std::size_t B = batch.size, N = batch.max_elements;
  TrainingStepResult result;
  result.timesteps.resize(B);
  for (auto& t : result.timesteps) t = static_cast<int>(1 + stream.uniform_index(schedule.steps));
  result.noise = seeded_gaussian(Shape{B, N, 4}, stream);
  for (std::size_t slot = 0; slot < B * N; ++slot) {
    if (!batch.mask[slot]) std::fill(result.noise.row(slot).begin(), result.noise.row(slot).end(), 0.0);
  }
  const Tensor noised = q_sample(batch.geometry, result.timesteps, result.noise, batch, schedule);

  Graph graph;
  Var eps_hat = denoise_graph(graph, params, config, noised, result.timesteps, batch);
  Var loss = graph.masked_mse(eps_hat, result.noise.reshaped({B * N, 4}), batch.mask);
  result.loss = graph.value(loss)[0];
  result.predicted = graph.value(eps_hat).reshaped({B, N, 4});
  if (!std::isfinite(result.loss)) throw NumericError("training loss is not finite");
  graph.backward(loss);
  const Gradients grads = graph.parameter_grads(params);
  for (const auto& [name, g] : grads) g.require_finite("gradient of " + name);
  adam_step(params, grads, adam);
  return result;
}

}  // namespace layoutdm
