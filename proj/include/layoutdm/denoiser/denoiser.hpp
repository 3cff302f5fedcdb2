#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "layoutdm/layout/layout.hpp"
#include "layoutdm/numerics/graph.hpp"
#include "layoutdm/numerics/parameters.hpp"

namespace layoutdm {

struct DenoiserConfig {
  std::size_t d_model = 256;
  std::size_t num_layers = 8;
  std::size_t num_heads = 8;
  std::size_t ffn_dim = 1024;
  AttributeMode attribute_mode = AttributeMode::categorical;
  std::size_t num_classes = 0;  // categorical
  std::size_t attr_dim = 0;     // continuous
  bool positional_encoding = false;
  std::size_t max_elements = kDefaultMaxElements;
  Activation activation = Activation::gelu;
  double layer_norm_eps = 1e-8;

  // Throws DataError on inconsistent settings.
  void validate() const;

  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

// Sinusoidal embedding: entry k of the first half is sin(t / 10000^(2k/d)),
// entry k of the second half the matching cos, k = 0 .. d/2-1.
std::vector<double> timestep_embedding(double t, std::size_t d_model);

// Scaled-uniform affines, N(0, 0.02) embedding table, unit/zero layer norms.
ParameterStore init_denoiser_params(const DenoiserConfig& config, std::uint64_t seed);

// Parameter-name prefix for transformer layer `index`, e.g. "layer03".
std::string layer_prefix(std::size_t index);

// Graph-level building blocks. Token tensors are [B*N, d_model] row blocks.

// g_t: [B*N, 4] (or [B, N, 4]) noised geometry.
Var embed_geometry(Graph& graph, const ParameterStore& params, const Tensor& noised_geometry);
// Label lookup or feature projection, taken from the batch's attributes.
Var embed_attributes(Graph& graph, const ParameterStore& params, const DenoiserConfig& config, const Batch& cond);
// E = Affine(concat(h_f, h_g)) + te, te: [B*N, d_model] (TE already broadcast).
Var fuse_tokens(Graph& graph, const ParameterStore& params, Var attributes, Var geometry, const Tensor& te_rows);
// Post-norm block: LayerNorm(E + MHA(E)), then LayerNorm(Ê + FFN(Ê)).
Var transformer_layer(Graph& graph, const ParameterStore& params, const DenoiserConfig& config, std::size_t index,
                      Var tokens, AttentionShape shape, std::span<const std::uint8_t> mask);

// TE(t_b) repeated over the N slots of each batch row, plus the element-index
// encoding when positional_encoding is on.
Tensor token_offsets(const DenoiserConfig& config, std::span<const int> timesteps, std::size_t batch,
                     std::size_t seq);

// Full forward pass recorded on `graph`; returns predicted noise [B*N, 4] with
// padded slots zeroed.
Var denoise_graph(Graph& graph, const ParameterStore& params, const DenoiserConfig& config,
                  const Tensor& noised_geometry, std::span<const int> timesteps, const Batch& cond);

// Forward pass only; returns [B, N, 4].
Tensor denoise(const Tensor& noised_geometry, std::span<const int> timesteps, const Batch& cond,
               const ParameterStore& params, const DenoiserConfig& config);

}  // namespace layoutdm
