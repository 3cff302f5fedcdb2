#include "layoutdm/cli/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "layoutdm/error.hpp"

namespace layoutdm {

using nlohmann::json;

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(DataErrorCode::malformed_json, std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw DataError(DataErrorCode::malformed_json, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw DataError(DataErrorCode::unknown_field, "unknown " + where + " key '" + key + "'");
    }
  }
}

void require_parent_exists(const std::filesystem::path& p) {
  const auto parent = p.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw DataError(DataErrorCode::io, "output directory does not exist", parent.string());
  }
}

std::string format_loss(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Rewrites the loss log keeping the header and rows with step <= keep_until.
void truncate_loss_log(const std::filesystem::path& path, std::size_t keep_until) {
  std::vector<std::string> kept{"step,loss"};
  if (std::ifstream in{path}) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      if (std::stoull(line.substr(0, comma)) <= keep_until) kept.push_back(line);
    }
  }
  std::ofstream out{path, std::ios::trunc};
  if (!out) throw DataError(DataErrorCode::io, "cannot write loss log", path.string());
  for (const auto& l : kept) out << l << '\n';
}

void write_checkpoint_atomically(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto tmp = path;
  tmp += ".tmp";
  save_checkpoint(tmp, ckpt);
  std::filesystem::rename(tmp, path);
}

}  // namespace

void apply_run_config(const json& j, RunConfig& c) {
  reject_unknown(j,
                 {"dataset", "output_dir", "checkpoint", "loss_log", "denoiser", "diffusion", "optimizer", "batch_size",
                  "max_steps", "checkpoint_every", "log_every", "seeds", "precision", "data"},
                 "config");
  std::string s;
  if (j.contains("dataset")) take(j, "dataset", s), c.dataset = s;
  if (j.contains("output_dir")) take(j, "output_dir", s), c.output_dir = s;
  if (j.contains("checkpoint")) take(j, "checkpoint", s), c.checkpoint = s;
  if (j.contains("loss_log")) take(j, "loss_log", s), c.loss_log = s;
  try {
    if (j.contains("denoiser")) {
      json merged = c.denoiser;
      merged.update(j.at("denoiser"));
      c.denoiser = merged.get<DenoiserConfig>();
    }
    if (j.contains("diffusion")) {
      json merged = c.diffusion;
      merged.update(j.at("diffusion"));
      c.diffusion = merged.get<DiffusionConfig>();
    }
  } catch (const json::exception& e) {
    throw DataError(DataErrorCode::malformed_json, std::string("config: ") + e.what());
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    reject_unknown(o, {"lr", "beta1", "beta2", "eps"}, "optimizer");
    take(o, "lr", c.optimizer.lr);
    take(o, "beta1", c.optimizer.beta1);
    take(o, "beta2", c.optimizer.beta2);
    take(o, "eps", c.optimizer.eps);
  }
  take(j, "batch_size", c.batch_size);
  take(j, "max_steps", c.max_steps);
  take(j, "checkpoint_every", c.checkpoint_every);
  take(j, "log_every", c.log_every);
  if (j.contains("seeds")) {
    const auto& sj = j.at("seeds");
    reject_unknown(sj, {"data", "init", "train", "sample"}, "seeds");
    take(sj, "data", c.seeds.data);
    take(sj, "init", c.seeds.init);
    take(sj, "train", c.seeds.train);
    take(sj, "sample", c.seeds.sample);
  }
  take(j, "precision", c.precision);
}

json run_config_echo(const RunConfig& c) {
  return {{"denoiser", c.denoiser},
          {"diffusion", c.diffusion},
          {"optimizer", {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2},
                         {"eps", c.optimizer.eps}}},
          {"batch_size", c.batch_size},
          {"max_steps", c.max_steps},
          {"checkpoint_every", c.checkpoint_every},
          {"log_every", c.log_every},
          {"seeds", {{"data", c.seeds.data}, {"init", c.seeds.init}, {"train", c.seeds.train},
                     {"sample", c.seeds.sample}}},
          {"precision", c.precision}};
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) throw DataError(DataErrorCode::io, "cannot read file", path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

TrainSummary run_training(RunConfig config, const std::optional<Checkpoint>& resume, std::ostream& log) {
  // Everything that can fail on input is checked before step 0.
  if (config.precision != "f64") {
    throw UsageError("precision '" + config.precision + "' is not supported; only f64 is available");
  }
  if (config.batch_size == 0) throw UsageError("batch_size must be positive");
  if (config.checkpoint_every == 0) throw UsageError("checkpoint_every must be positive");
  if (config.dataset.empty()) throw UsageError("no dataset given (--dataset is required, also when resuming)");
  if (!std::filesystem::exists(config.dataset)) {
    throw DataError(DataErrorCode::io, "dataset file not found", config.dataset.string());
  }
  require_parent_exists(config.checkpoint_path());
  require_parent_exists(config.loss_log_path());
  const Dataset data = load_dataset_auto(config.dataset, config.denoiser.max_elements);
  if (data.layouts.empty()) throw DataError(DataErrorCode::empty_layout, "dataset has no layouts", config.dataset.string());

  config.denoiser.attribute_mode = data.schema.mode;
  config.denoiser.num_classes = data.schema.label_names.size();
  config.denoiser.attr_dim = data.schema.feature_dim;
  config.denoiser.validate();
  config.diffusion.validate();

  json echo = run_config_echo(config);
  json canvas = {{"width", data.canvas.width}, {"height", data.canvas.height}};
  echo["data"] = {{"fingerprint", file_fingerprint(config.dataset)},
                  {"layouts", data.layouts.size()},
                  {"canvas", canvas},
                  {"attribute_mode", to_string(data.schema.mode)},
                  {"labels", data.schema.label_names},
                  {"feature_dim", data.schema.feature_dim}};

  Checkpoint state;
  if (resume) {
    state = *resume;
    if (!state.adam) throw DataError(DataErrorCode::invalid_argument, "checkpoint has no optimizer state");
    if (!state.rng.contains("train")) throw DataError(DataErrorCode::invalid_argument, "checkpoint has no training stream");
    const json& old = state.config;
    if (!old.contains("data") || old["data"].value("fingerprint", "") != echo["data"]["fingerprint"]) {
      throw DataError(DataErrorCode::invalid_argument, "checkpoint was trained on a different dataset",
                      config.dataset.string());
    }
    if (old.value("denoiser", json()) != echo["denoiser"] || old.value("diffusion", json()) != echo["diffusion"]) {
      throw DataError(DataErrorCode::invalid_argument, "checkpoint model settings differ from the requested ones");
    }
    if (!state.params.same_layout(init_denoiser_params(config.denoiser, 0))) {
      throw DataError(DataErrorCode::shape_mismatch, "checkpoint parameters do not fit the model settings");
    }
    state.adam->hyper = config.optimizer;
  } else {
    state.params = init_denoiser_params(config.denoiser, config.seeds.init);
    state.adam = AdamState{config.optimizer, 0, {}, {}};
    state.rng["train"] = RngStream{config.seeds.train, 0};
    state.step = 0;
  }
  state.config = echo;

  const NoiseSchedule schedule = config.diffusion.schedule();
  TrainSummary summary;
  summary.start_step = state.step;

  const auto log_path = config.loss_log_path();
  if (resume) {
    truncate_loss_log(log_path, state.step);
  } else {
    std::ofstream fresh{log_path, std::ios::trunc};
    if (!fresh) throw DataError(DataErrorCode::io, "cannot write loss log", log_path.string());
    fresh << "step,loss\n";
  }
  std::ofstream loss_log{log_path, std::ios::app};
  if (!loss_log) throw DataError(DataErrorCode::io, "cannot write loss log", log_path.string());

  RngStream& stream = state.rng["train"];
  std::vector<Layout> picked(config.batch_size);
  while (state.step < config.max_steps) {
    for (auto& l : picked) l = data.layouts[stream.uniform_index(data.layouts.size())];
    const Batch batch = pad_batch(picked);
    const auto result = training_step(batch, state.params, config.denoiser, *state.adam, schedule, stream);
    ++state.step;
    summary.losses.push_back(result.loss);
    loss_log << state.step << ',' << format_loss(result.loss) << '\n';
    if (config.log_every > 0 && state.step % config.log_every == 0) {
      log << "step " << state.step << " loss " << result.loss << '\n';
    }
    if (state.step % config.checkpoint_every == 0) {
      loss_log.flush();
      write_checkpoint_atomically(config.checkpoint_path(), state);
    }
  }
  loss_log.flush();
  write_checkpoint_atomically(config.checkpoint_path(), state);
  summary.end_step = state.step;
  return summary;
}

TrainedModel load_trained_model(const std::filesystem::path& checkpoint_path) {
  TrainedModel m;
  m.checkpoint = load_checkpoint(checkpoint_path);
  const json& cfg = m.checkpoint.config;
  if (!cfg.contains("data")) {
    throw DataError(DataErrorCode::missing_field, "checkpoint config lacks the dataset description",
                    checkpoint_path.string());
  }
  apply_run_config(cfg, m.config);
  const json& d = cfg.at("data");
  try {
    m.canvas = Canvas{d.at("canvas").at("width").get<double>(), d.at("canvas").at("height").get<double>()};
    m.schema.mode = d.at("attribute_mode").get<std::string>() == "continuous" ? AttributeMode::continuous
                                                                              : AttributeMode::categorical;
    m.schema.label_names = d.at("labels").get<std::vector<std::string>>();
    m.schema.feature_dim = d.at("feature_dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(DataErrorCode::malformed_json, std::string("checkpoint dataset description: ") + e.what(),
                    checkpoint_path.string());
  }
  m.config.denoiser.validate();
  if (!m.checkpoint.params.same_layout(init_denoiser_params(m.config.denoiser, 0))) {
    throw DataError(DataErrorCode::shape_mismatch, "checkpoint parameters do not match its model settings",
                    checkpoint_path.string());
  }
  return m;
}

namespace {

void check_condition(const Layout& l, const TrainedModel& model) {
  if (l.elements.empty()) throw DataError(DataErrorCode::empty_layout, "condition has no elements", l.id);
  if (l.size() > model.config.denoiser.max_elements) {
    throw DataError(DataErrorCode::too_many_elements,
                    "condition has " + std::to_string(l.size()) + " elements, model allows " +
                        std::to_string(model.config.denoiser.max_elements),
                    l.id);
  }
  for (const auto& e : l.elements) {
    if (e.mode() != model.schema.mode) {
      throw DataError(DataErrorCode::attribute_mode_mismatch, "condition attribute mode differs from the model", l.id);
    }
    if (e.mode() == AttributeMode::categorical) {
      if (e.label() < 0 || static_cast<std::size_t>(e.label()) >= model.schema.label_names.size()) {
        throw DataError(DataErrorCode::label_out_of_vocabulary,
                        "label id " + std::to_string(e.label()) + " is outside the training vocabulary of " +
                            std::to_string(model.schema.label_names.size()) + " labels",
                        l.id);
      }
    } else if (e.feature().size() != model.schema.feature_dim) {
      throw DataError(DataErrorCode::shape_mismatch, "condition feature width differs from the model", l.id);
    }
  }
}

}  // namespace

Dataset generate_layouts(const TrainedModel& model, const std::vector<Layout>& conditions, std::size_t count,
                         std::uint64_t seed, std::size_t batch_size) {
  if (conditions.empty()) throw UsageError("no sampling conditions given");
  if (count == 0) throw UsageError("sample count must be positive");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  for (const auto& c : conditions) check_condition(c, model);

  std::vector<Layout> requests;
  for (const auto& c : conditions) {
    for (std::size_t r = 0; r < count; ++r) {
      Layout l = c;
      l.id = (c.id.empty() ? std::string("cond") : c.id) + "/sample-" + std::to_string(r);
      for (auto& e : l.elements) {
        e.geometry = Box{};
        e.raw_geometry.reset();
      }
      requests.push_back(std::move(l));
    }
  }

  const NoiseSchedule schedule = model.config.diffusion.schedule();
  const NoisePredictor predict = make_noise_predictor(model.checkpoint.params, model.config.denoiser);
  RngStream stream{seed, 0};

  Dataset out;
  out.canvas = model.canvas;
  out.schema = model.schema;
  for (std::size_t start = 0; start < requests.size(); start += batch_size) {
    const std::size_t end = std::min(requests.size(), start + batch_size);
    std::span<const Layout> chunk(requests.data() + start, end - start);
    const Batch cond = pad_batch(chunk);
    const SampleResult result = sample(cond, predict, schedule, stream, model.config.diffusion);
    const auto clamped = unpad_batch(cond, &result.clamped);
    const auto raw = unpad_batch(cond, &result.raw);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      Layout l = clamped[b];
      l.id = chunk[b].id;
      for (std::size_t n = 0; n < l.size(); ++n) l.elements[n].raw_geometry = raw[b].elements[n].geometry;
      out.layouts.push_back(std::move(l));
    }
  }
  out.metadata = {{"sampler",
                   {{"seed", seed},
                    {"count_per_condition", count},
                    {"conditions", conditions.size()},
                    {"batch_size", batch_size},
                    {"checkpoint_step", model.checkpoint.step},
                    {"rng", RngStream::algorithm},
                    {"guidance_weight", model.config.diffusion.guidance_weight}}},
                  {"config", model.checkpoint.config}};
  return out;
}

std::vector<Layout> conditions_from_dataset(const Dataset& conditions, const TrainedModel& model) {
  if (conditions.schema.mode != model.schema.mode) {
    throw DataError(DataErrorCode::attribute_mode_mismatch, "condition file attribute mode differs from the model");
  }
  std::vector<Layout> out = conditions.layouts;
  if (model.schema.mode != AttributeMode::categorical) return out;
  const auto& names = model.schema.label_names;
  for (auto& l : out) {
    for (auto& e : l.elements) {
      const std::string& name = conditions.schema.label_names.at(static_cast<std::size_t>(e.label()));
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) {
        throw DataError(DataErrorCode::label_out_of_vocabulary,
                        "label '" + name + "' is outside the training vocabulary", l.id);
      }
      e.attribute = static_cast<int>(it - names.begin());
    }
  }
  return out;
}

Layout conditions_from_labels(const std::string& spec, const TrainedModel& model) {
  if (model.schema.mode != AttributeMode::categorical) {
    throw UsageError("inline labels need a categorical model; use a condition file");
  }
  Layout l;
  l.id = "labels";
  std::stringstream ss(spec);
  std::string token;
  const auto& names = model.schema.label_names;
  while (std::getline(ss, token, ',')) {
    token.erase(0, token.find_first_not_of(" \t"));
    token.erase(token.find_last_not_of(" \t") + 1);
    if (token.empty()) throw UsageError("empty entry in label list '" + spec + "'");
    Element e;
    const bool numeric = std::all_of(token.begin(), token.end(), [](char c) { return c == '-' || std::isdigit(static_cast<unsigned char>(c)); });
    if (numeric) {
      long long id = 0;
      try {
        id = std::stoll(token);
      } catch (const std::exception&) {
        throw UsageError("bad label id '" + token + "'");
      }
      if (id < 0 || static_cast<std::size_t>(id) >= names.size()) {
        throw DataError(DataErrorCode::label_out_of_vocabulary,
                        "label id " + token + " is outside the training vocabulary of " + std::to_string(names.size()) +
                            " labels",
                        token);
      }
      e.attribute = static_cast<int>(id);
    } else {
      const auto it = std::find(names.begin(), names.end(), token);
      if (it == names.end()) {
        throw DataError(DataErrorCode::label_out_of_vocabulary, "label '" + token + "' is outside the training vocabulary",
                        token);
      }
      e.attribute = static_cast<int>(it - names.begin());
    }
    l.elements.push_back(e);
  }
  if (l.elements.empty()) throw UsageError("label list is empty");
  return l;
}

}  // namespace layoutdm
