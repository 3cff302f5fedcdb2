#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutdm/denoiser/denoiser.hpp"
#include "layoutdm/diffusion/diffusion.hpp"
#include "layoutdm/layout/dataset.hpp"
#include "layoutdm/numerics/adam.hpp"
#include "layoutdm/numerics/checkpoint.hpp"

namespace layoutdm {

struct Seeds {
  std::uint64_t data = 0;
  std::uint64_t init = 0;
  std::uint64_t train = 0;
  std::uint64_t sample = 0;

  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir = ".";
  std::filesystem::path checkpoint = "model.ckpt";  // relative to output_dir
  std::filesystem::path loss_log = "loss.csv";      // relative to output_dir

  DenoiserConfig denoiser;
  DiffusionConfig diffusion;
  AdamHyperparameters optimizer;
  std::size_t batch_size = 64;
  std::size_t max_steps = 2000;
  std::size_t checkpoint_every = 500;
  std::size_t log_every = 100;
  Seeds seeds;
  std::string precision = "f64";

  std::filesystem::path checkpoint_path() const { return output_dir / checkpoint; }
  std::filesystem::path loss_log_path() const { return output_dir / loss_log; }
};

// Overlays the keys present in `j` onto `config`; unknown keys are rejected.
// Recognized keys: dataset, output_dir, checkpoint, loss_log, denoiser,
// diffusion, optimizer{lr,beta1,beta2,eps}, batch_size, max_steps,
// checkpoint_every, log_every, seeds{data,init,train,sample}, precision, and
// the informational "data" block written by training.
void apply_run_config(const nlohmann::json& j, RunConfig& config);

// Reproducibility echo: every setting that influences results, without the
// output locations.
nlohmann::json run_config_echo(const RunConfig& config);

// Content fingerprint of a file (FNV-1a 64, hex).
std::string file_fingerprint(const std::filesystem::path& path);

struct TrainSummary {
  std::size_t start_step = 0;
  std::size_t end_step = 0;
  std::vector<double> losses;  // losses of the steps run in this call
};

// Trains for config.max_steps total steps. Checkpoints every
// checkpoint_every steps and at exit; the loss log gets one "step,loss" row
// per step. With `resume`, parameters, optimizer moments, the training
// stream and the step counter come from the checkpoint, and the loss log is
// truncated to the checkpoint step before appending, so an interrupted and
// resumed run reproduces an uninterrupted one bit for bit.
TrainSummary run_training(RunConfig config, const std::optional<Checkpoint>& resume, std::ostream& log);

// Vocabulary, canvas and model settings recovered from a training checkpoint.
struct TrainedModel {
  RunConfig config;
  Canvas canvas;
  AttributeSchema schema;
  Checkpoint checkpoint;
};

TrainedModel load_trained_model(const std::filesystem::path& checkpoint_path);

// Draws `count` samples for each condition layout (only attributes are read).
// All draws come from one stream seeded with `seed`, consumed in condition
// order in chunks of `batch_size` layouts.
Dataset generate_layouts(const TrainedModel& model, const std::vector<Layout>& conditions, std::size_t count,
                         std::uint64_t seed, std::size_t batch_size);

// Maps a condition dataset onto the model vocabulary by label name.
std::vector<Layout> conditions_from_dataset(const Dataset& conditions, const TrainedModel& model);
// Parses "0,1,1,2" (ids) or "text,figure" (names) into one condition layout.
Layout conditions_from_labels(const std::string& spec, const TrainedModel& model);

}  // namespace layoutdm
