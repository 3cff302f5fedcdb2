#include "layoutdm/denoiser/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "layoutdm/error.hpp"
#include "layoutdm/numerics/rng.hpp"

namespace layoutdm {

namespace {

constexpr double kEmbeddingStd = 0.02;

struct ParamSpec {
  std::string name;
  Shape shape;
  enum class Init { xavier, normal, zeros, ones } init;
};

std::vector<ParamSpec> parameter_specs(const DenoiserConfig& c) {
  using I = ParamSpec::Init;
  const std::size_t d = c.d_model;
  std::vector<ParamSpec> specs;
  auto affine = [&](const std::string& name, std::size_t in, std::size_t out) {
    specs.push_back({name + ".weight", {in, out}, I::xavier});
    specs.push_back({name + ".bias", {out}, I::zeros});
  };
  if (c.attribute_mode == AttributeMode::categorical) {
    specs.push_back({"attr_embed.table", {c.num_classes, d}, I::normal});
  } else {
    affine("attr_embed", c.attr_dim, d);
  }
  affine("geom_embed", 4, d);
  affine("fuse", 2 * d, d);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    affine(p + ".attn_q", d, d);
    affine(p + ".attn_k", d, d);
    affine(p + ".attn_v", d, d);
    affine(p + ".attn_out", d, d);
    specs.push_back({p + ".norm1.gamma", {d}, I::ones});
    specs.push_back({p + ".norm1.beta", {d}, I::zeros});
    affine(p + ".ffn1", d, c.ffn_dim);
    affine(p + ".ffn2", c.ffn_dim, d);
    specs.push_back({p + ".norm2.gamma", {d}, I::ones});
    specs.push_back({p + ".norm2.beta", {d}, I::zeros});
  }
  affine("head", d, 4);
  return specs;
}

Var affine(Graph& g, const ParameterStore& params, const std::string& name, Var x) {
  return g.linear(x, g.parameter(params, name + ".weight"), g.parameter(params, name + ".bias"));
}

}  // namespace

void DenoiserConfig::validate() const {
  auto fail = [](const std::string& what) { throw DataError(DataErrorCode::invalid_argument, "denoiser config: " + what); };
  if (d_model == 0 || d_model % 2 != 0) fail("d_model must be positive and even");
  if (num_heads == 0 || d_model % num_heads != 0) fail("d_model must be divisible by num_heads");
  if (num_layers < 1) fail("num_layers must be at least 1");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (max_elements == 0) fail("max_elements must be positive");
  if (attribute_mode == AttributeMode::categorical && num_classes == 0) fail("num_classes must be positive");
  if (attribute_mode == AttributeMode::continuous && attr_dim == 0) fail("attr_dim must be positive");
  if (!(layer_norm_eps > 0.0)) fail("layer_norm_eps must be positive");
}

void to_json(nlohmann::json& j, const DenoiserConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"ffn_dim", c.ffn_dim},
                     {"attribute_mode", to_string(c.attribute_mode)},
                     {"num_classes", c.num_classes},
                     {"attr_dim", c.attr_dim},
                     {"positional_encoding", c.positional_encoding},
                     {"max_elements", c.max_elements},
                     {"activation", c.activation == Activation::gelu ? "gelu" : "relu"},
                     {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const nlohmann::json& j, DenoiserConfig& c) {
  static const char* known[] = {"d_model",     "num_layers",          "num_heads",    "ffn_dim",
                                "attribute_mode", "num_classes",      "attr_dim",     "positional_encoding",
                                "max_elements", "activation",         "layer_norm_eps"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw DataError(DataErrorCode::unknown_field, "unknown denoiser setting '" + key + "'");
    }
  }
  c.d_model = j.value("d_model", c.d_model);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  if (j.contains("attribute_mode")) {
    const auto m = j.at("attribute_mode").get<std::string>();
    if (m != "categorical" && m != "continuous") throw DataError(DataErrorCode::invalid_argument, "attribute_mode " + m);
    c.attribute_mode = m == "categorical" ? AttributeMode::categorical : AttributeMode::continuous;
  }
  c.num_classes = j.value("num_classes", c.num_classes);
  c.attr_dim = j.value("attr_dim", c.attr_dim);
  c.positional_encoding = j.value("positional_encoding", c.positional_encoding);
  c.max_elements = j.value("max_elements", c.max_elements);
  if (j.contains("activation")) {
    const auto a = j.at("activation").get<std::string>();
    if (a != "gelu" && a != "relu") throw DataError(DataErrorCode::invalid_argument, "activation " + a);
    c.activation = a == "gelu" ? Activation::gelu : Activation::relu;
  }
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
}

std::vector<double> timestep_embedding(double t, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw DataError(DataErrorCode::invalid_argument, "timestep embedding needs an even, positive dimension");
  }
  const std::size_t half = d_model / 2;
  std::vector<double> out(d_model);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d_model));
    out[k] = std::sin(t * freq);
    out[half + k] = std::cos(t * freq);
  }
  return out;
}

std::string layer_prefix(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "layer%02zu", index);
  return buf;
}

ParameterStore init_denoiser_params(const DenoiserConfig& config, std::uint64_t seed) {
  config.validate();
  auto specs = parameter_specs(config);
  std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  RngStream rng{seed, 0};
  ParameterStore params;
  for (const auto& s : specs) {
    Tensor t(s.shape);
    switch (s.init) {
      case ParamSpec::Init::xavier: {
        const double limit = std::sqrt(6.0 / static_cast<double>(s.shape[0] + s.shape[1]));
        for (double& v : t.data()) v = limit * (2.0 * rng.uniform() - 1.0);
        break;
      }
      case ParamSpec::Init::normal:
        t = seeded_gaussian(s.shape, rng) * kEmbeddingStd;
        break;
      case ParamSpec::Init::ones:
        t = Tensor(s.shape, 1.0);
        break;
      case ParamSpec::Init::zeros:
        break;
    }
    params.add(s.name, std::move(t));
  }
  return params;
}

Var embed_geometry(Graph& graph, const ParameterStore& params, const Tensor& noised_geometry) {
  if (noised_geometry.cols() != 4) {
    throw DataError(DataErrorCode::shape_mismatch, "geometry must have 4 columns, got " +
                                                       shape_to_string(noised_geometry.shape()));
  }
  Var x = graph.constant(noised_geometry.reshaped({noised_geometry.rows(), 4}));
  return affine(graph, params, "geom_embed", x);
}

Var embed_attributes(Graph& graph, const ParameterStore& params, const DenoiserConfig& config, const Batch& cond) {
  if (cond.mode != config.attribute_mode) {
    throw DataError(DataErrorCode::attribute_mode_mismatch,
                    std::string("model expects ") + to_string(config.attribute_mode) + " attributes");
  }
  if (config.attribute_mode == AttributeMode::categorical) {
    return graph.embedding(graph.parameter(params, "attr_embed.table"), cond.labels);
  }
  if (cond.features.cols() != config.attr_dim) {
    throw DataError(DataErrorCode::shape_mismatch, "feature dimension " + std::to_string(cond.features.cols()) +
                                                       " does not match attr_dim " + std::to_string(config.attr_dim));
  }
  Var x = graph.constant(cond.features.reshaped({cond.features.rows(), config.attr_dim}));
  return affine(graph, params, "attr_embed", x);
}

Var fuse_tokens(Graph& graph, const ParameterStore& params, Var attributes, Var geometry, const Tensor& te_rows) {
  Var fused = affine(graph, params, "fuse", graph.concat_cols(attributes, geometry));
  if (graph.value(fused).shape() != te_rows.shape()) {
    throw DataError(DataErrorCode::shape_mismatch, "timestep embedding rows " + shape_to_string(te_rows.shape()) +
                                                       " vs tokens " + shape_to_string(graph.value(fused).shape()));
  }
  return graph.add_constant(fused, te_rows);
}

Var transformer_layer(Graph& graph, const ParameterStore& params, const DenoiserConfig& config, std::size_t index,
                      Var tokens, AttentionShape shape, std::span<const std::uint8_t> mask) {
  const std::string p = layer_prefix(index);
  shape.heads = config.num_heads;
  Var q = affine(graph, params, p + ".attn_q", tokens);
  Var k = affine(graph, params, p + ".attn_k", tokens);
  Var v = affine(graph, params, p + ".attn_v", tokens);
  Var heads = affine(graph, params, p + ".attn_out", graph.attention(q, k, v, shape, mask));
  Var mid = graph.layer_norm(graph.add(tokens, heads), graph.parameter(params, p + ".norm1.gamma"),
                             graph.parameter(params, p + ".norm1.beta"), config.layer_norm_eps);
  Var hidden = graph.activation(affine(graph, params, p + ".ffn1", mid), config.activation);
  Var ffn = affine(graph, params, p + ".ffn2", hidden);
  return graph.layer_norm(graph.add(mid, ffn), graph.parameter(params, p + ".norm2.gamma"),
                          graph.parameter(params, p + ".norm2.beta"), config.layer_norm_eps);
}

Tensor token_offsets(const DenoiserConfig& config, std::span<const int> timesteps, std::size_t batch,
                     std::size_t seq) {
  if (timesteps.size() != batch) {
    throw DataError(DataErrorCode::shape_mismatch, "need one timestep per batch row");
  }
  const std::size_t d = config.d_model;
  Tensor out(Shape{batch * seq, d});
  for (std::size_t b = 0; b < batch; ++b) {
    if (timesteps[b] < 0) throw DataError(DataErrorCode::out_of_range, "negative timestep");
    const auto te = timestep_embedding(timesteps[b], d);
    for (std::size_t n = 0; n < seq; ++n) std::copy(te.begin(), te.end(), out.row(b * seq + n).begin());
  }
  if (config.positional_encoding) {
    for (std::size_t n = 0; n < seq; ++n) {
      const auto pe = timestep_embedding(static_cast<double>(n), d);
      for (std::size_t b = 0; b < batch; ++b) {
        auto row = out.row(b * seq + n);
        for (std::size_t c = 0; c < d; ++c) row[c] += pe[c];
      }
    }
  }
  return out;
}

Var denoise_graph(Graph& graph, const ParameterStore& params, const DenoiserConfig& config,
                  const Tensor& noised_geometry, std::span<const int> timesteps, const Batch& cond) {
  const std::size_t B = cond.size, N = cond.max_elements;
  if (noised_geometry.size() != B * N * 4) {
    throw DataError(DataErrorCode::shape_mismatch, "noised geometry " + shape_to_string(noised_geometry.shape()) +
                                                       " does not match batch [" + std::to_string(B) + "," +
                                                       std::to_string(N) + ",4]");
  }
  if (N > config.max_elements) {
    throw DataError(DataErrorCode::too_many_elements, "batch has " + std::to_string(N) + " slots, model allows " +
                                                          std::to_string(config.max_elements));
  }
  Var h_f = embed_attributes(graph, params, config, cond);
  Var h_g = embed_geometry(graph, params, noised_geometry);
  Var tokens = fuse_tokens(graph, params, h_f, h_g, token_offsets(config, timesteps, B, N));
  const AttentionShape shape{B, N, config.num_heads};
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    tokens = transformer_layer(graph, params, config, l, tokens, shape, cond.mask);
  }
  return graph.mask_rows(affine(graph, params, "head", tokens), cond.mask);
}

Tensor denoise(const Tensor& noised_geometry, std::span<const int> timesteps, const Batch& cond,
               const ParameterStore& params, const DenoiserConfig& config) {
  Graph graph;
  Var out = denoise_graph(graph, params, config, noised_geometry, timesteps, cond);
  Tensor eps = graph.value(out).reshaped({cond.size, cond.max_elements, 4});
  eps.require_finite("denoiser output");
  return eps;
}

}  // namespace layoutdm
