#include "layoutdm/cli/commands.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "layoutdm/cli/pipeline.hpp"
#include "layoutdm/cli/report.hpp"
#include "layoutdm/cli/svg.hpp"
#include "layoutdm/error.hpp"

namespace layoutdm {

using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f{path, std::ios::binary | std::ios::trunc};
  if (!f) throw DataError(DataErrorCode::io, "cannot open output file", path);
  f << text;
  if (!f) throw DataError(DataErrorCode::io, "write failed", path);
}

json read_json_file(const std::string& path) {
  std::ifstream f{path};
  if (!f) throw DataError(DataErrorCode::io, "cannot read file", path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw DataError(DataErrorCode::malformed_json, e.what(), path);
  }
}

FeatureSet load_feature_set(const std::string& path) {
  const json doc = read_json_file(path);
  FeatureSet fs;
  try {
    fs.provenance = doc.value("provenance", std::string("file:") + std::filesystem::path(path).filename().string());
    const auto rows = doc.at("features").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw DataError(DataErrorCode::empty_layout, "feature file has no rows", path);
    fs.features = Tensor(Shape{rows.size(), rows.front().size()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) {
        throw DataError(DataErrorCode::shape_mismatch, "feature rows have different lengths", path);
      }
      std::copy(rows[r].begin(), rows[r].end(), fs.features.row(r).begin());
    }
  } catch (const json::exception& e) {
    throw DataError(DataErrorCode::malformed_json, e.what(), path);
  }
  return fs;
}

std::string dataset_summary(const Dataset& d) {
  std::ostringstream s;
  s << "layouts " << d.layouts.size() << ", elements " << d.total_elements() << ", largest " << d.max_layout_size()
    << '\n';
  if (d.schema.mode == AttributeMode::categorical) {
    const auto hist = d.label_histogram();
    for (std::size_t k = 0; k < hist.size(); ++k) s << "  " << d.schema.label_names[k] << ' ' << hist[k] << '\n';
  }
  return s.str();
}

struct SynthArgs {
  std::string rule = "grid_by_label";
  std::size_t layouts = 512;
  std::size_t classes = 4;
  std::size_t min_elements = 2;
  std::size_t max_elements = 4;
  std::uint64_t seed = 0;
  double width = 100.0;
  double height = 100.0;
  std::string output;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  spec.rule = parse_synthetic_rule(a.rule);
  spec.num_layouts = a.layouts;
  spec.num_classes = a.classes;
  spec.min_elements = a.min_elements;
  spec.max_elements = a.max_elements;
  spec.canvas = Canvas{a.width, a.height};
  if (spec.min_elements > spec.max_elements) throw UsageError("--min-elements exceeds --max-elements");
  Dataset d = make_synthetic_dataset(spec, a.seed);
  d.metadata = {{"generator",
                 {{"rule", to_string(spec.rule)},
                  {"layouts", spec.num_layouts},
                  {"classes", spec.num_classes},
                  {"min_elements", spec.min_elements},
                  {"max_elements", spec.max_elements},
                  {"canvas", {{"width", spec.canvas.width}, {"height", spec.canvas.height}}},
                  {"seed", a.seed}}}};
  save_dataset(a.output, d);
  out << "wrote " << a.output << '\n' << dataset_summary(d);
  return kExitSuccess;
}

struct TrainArgs {
  std::string config_file, resume, dataset, output_dir, checkpoint, loss_log, precision, activation;
  std::size_t steps = 0, batch_size = 0, d_model = 0, layers = 0, heads = 0, ffn_dim = 0, diffusion_steps = 0,
              checkpoint_every = 0, log_every = 0, max_elements = 0;
  double lr = 0.0;
  std::uint64_t seed_init = 0, seed_train = 0;
  bool positional_encoding = false;
};

// Layer order: defaults, resumed checkpoint echo, config file, flags.
int cmd_train(const TrainArgs& a, const CLI::App& app, std::ostream& out) {
  auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  RunConfig config;
  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) {
    resume = load_checkpoint(a.resume);
    apply_run_config(resume->config, config);
  }
  if (!a.config_file.empty()) {
    const auto doc = read_json_file(a.config_file);
    try {
      apply_run_config(doc, config);
    } catch (const DataError& e) {
      throw UsageError(a.config_file + ": " + e.what());
    }
  }
  if (given("--dataset")) config.dataset = a.dataset;
  if (given("--output-dir")) config.output_dir = a.output_dir;
  if (given("--checkpoint")) config.checkpoint = a.checkpoint;
  if (given("--loss-log")) config.loss_log = a.loss_log;
  if (given("--steps")) config.max_steps = a.steps;
  if (given("--batch-size")) config.batch_size = a.batch_size;
  if (given("--lr")) config.optimizer.lr = a.lr;
  if (given("--d-model")) config.denoiser.d_model = a.d_model;
  if (given("--layers")) config.denoiser.num_layers = a.layers;
  if (given("--heads")) config.denoiser.num_heads = a.heads;
  if (given("--ffn-dim")) config.denoiser.ffn_dim = a.ffn_dim;
  if (given("--activation")) config.denoiser.activation = a.activation == "relu" ? Activation::relu : Activation::gelu;
  if (given("--positional-encoding")) config.denoiser.positional_encoding = a.positional_encoding;
  if (given("--max-elements")) config.denoiser.max_elements = a.max_elements;
  if (given("--diffusion-steps")) config.diffusion.steps = a.diffusion_steps;
  if (given("--checkpoint-every")) config.checkpoint_every = a.checkpoint_every;
  if (given("--log-every")) config.log_every = a.log_every;
  if (given("--seed-init")) config.seeds.init = a.seed_init;
  if (given("--seed-train")) config.seeds.train = a.seed_train;
  if (given("--precision")) config.precision = a.precision;

  const TrainSummary s = run_training(config, resume, out);
  out << "trained steps " << s.start_step << ".." << s.end_step << ", checkpoint " << config.checkpoint_path().string()
      << ", loss log " << config.loss_log_path().string() << '\n';
  return kExitSuccess;
}

struct SampleArgs {
  std::string checkpoint, labels, conditions, output;
  std::size_t count = 1, limit = 0, batch_size = 64;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  if (a.labels.empty() == a.conditions.empty()) throw UsageError("give exactly one of --labels or --conditions");
  const TrainedModel model = load_trained_model(a.checkpoint);
  std::vector<Layout> conditions;
  if (!a.labels.empty()) {
    conditions.push_back(conditions_from_labels(a.labels, model));
  } else {
    const Dataset cond = load_dataset_auto(a.conditions, model.config.denoiser.max_elements);
    conditions = conditions_from_dataset(cond, model);
    if (a.limit > 0 && conditions.size() > a.limit) conditions.resize(a.limit);
  }
  const Dataset generated = generate_layouts(model, conditions, a.count, a.seed, a.batch_size);
  write_text(a.output, dataset_to_json(generated).dump(1) + "\n", out);
  return kExitSuccess;
}

struct EvalArgs {
  std::string generated, reference, features_generated, features_reference, output;
  bool blt_y = false, trivial_features = false;
  std::size_t max_elements = kDefaultMaxElements;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  // Inputs are fully loaded and checked before any metric is computed.
  const Dataset gen = load_dataset_auto(a.generated, a.max_elements);
  const Dataset ref = load_dataset_auto(a.reference, a.max_elements);
  EvalOptions options;
  options.blt_include_y = a.blt_y;
  options.trivial_features = a.trivial_features;
  if (!a.features_generated.empty() || !a.features_reference.empty()) {
    if (a.features_generated.empty() || a.features_reference.empty()) {
      throw UsageError("--features-generated and --features-reference go together");
    }
    options.generated_features = load_feature_set(a.features_generated);
    options.reference_features = load_feature_set(a.features_reference);
  }
  json report = evaluate(gen, ref, options);
  auto describe = [](const std::string& p) {
    return json{{"file", std::filesystem::path(p).filename().string()}, {"fingerprint", file_fingerprint(p)}};
  };
  json cfg = {{"generated", describe(a.generated)},
              {"reference", describe(a.reference)},
              {"blt_include_y", a.blt_y},
              {"trivial_features", a.trivial_features},
              {"max_elements", a.max_elements}};
  if (!a.features_generated.empty()) {
    cfg["features_generated"] = describe(a.features_generated);
    cfg["features_reference"] = describe(a.features_reference);
  }
  report["config"] = cfg;
  write_text(a.output, report.dump(1) + "\n", out);
  return kExitSuccess;
}

struct RenderArgs {
  std::string input, id, output;
  std::size_t index = 0;
};

int cmd_render(const RenderArgs& a, const CLI::App& app, std::ostream& out) {
  const Dataset d = load_dataset_auto(a.input);
  const Layout* chosen = nullptr;
  if (app.get_option("--id")->count() > 0) {
    for (const auto& l : d.layouts) {
      if (l.id == a.id) chosen = &l;
    }
    if (!chosen) throw DataError(DataErrorCode::invalid_argument, "no layout with this id", a.id);
  } else {
    if (a.index >= d.layouts.size()) {
      throw DataError(DataErrorCode::out_of_range,
                      "layout index " + std::to_string(a.index) + " beyond " + std::to_string(d.layouts.size()) +
                          " layouts",
                      a.input);
    }
    chosen = &d.layouts[a.index];
  }
  write_text(a.output, render_svg(*chosen, Palette::standard(), d.canvas, d.schema.label_names), out);
  return kExitSuccess;
}

int report_error(std::ostream& err, const char* kind, const std::string& what, const std::string& subject, int code) {
  err << "error (" << kind << "): " << what;
  if (!subject.empty()) err << " [" << subject << ']';
  err << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional diffusion model for bounding-box layouts", "layoutdm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic layout dataset");
  s->add_option("--rule", synth.rule, "grid_by_label or random_boxes")
      ->capture_default_str()
      ->check(CLI::IsMember({"grid_by_label", "random_boxes"}));
  s->add_option("--layouts", synth.layouts, "Number of layouts")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--classes", synth.classes, "Number of label classes")->capture_default_str()->check(CLI::Range(1, 1000));
  s->add_option("--min-elements", synth.min_elements)->capture_default_str()->check(CLI::Range(1, 1000));
  s->add_option("--max-elements", synth.max_elements)->capture_default_str()->check(CLI::Range(1, 1000));
  s->add_option("--seed", synth.seed, "Data seed")->capture_default_str();
  s->add_option("--canvas-width", synth.width)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--canvas-height", synth.height)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("-o,--output", synth.output, "Dataset JSON to write")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the denoiser");
  t->add_option("--config", train.config_file, "JSON run config");
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--dataset", train.dataset, "Training dataset JSON");
  t->add_option("--output-dir", train.output_dir);
  t->add_option("--checkpoint", train.checkpoint, "Checkpoint file name inside the output dir");
  t->add_option("--loss-log", train.loss_log, "Loss CSV file name inside the output dir");
  t->add_option("--steps", train.steps, "Total training steps");
  t->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
  t->add_option("--lr", train.lr)->check(CLI::PositiveNumber);
  t->add_option("--d-model", train.d_model)->check(CLI::PositiveNumber);
  t->add_option("--layers", train.layers)->check(CLI::PositiveNumber);
  t->add_option("--heads", train.heads)->check(CLI::PositiveNumber);
  t->add_option("--ffn-dim", train.ffn_dim)->check(CLI::PositiveNumber);
  t->add_option("--activation", train.activation)->check(CLI::IsMember({"gelu", "relu"}));
  t->add_option("--positional-encoding", train.positional_encoding);
  t->add_option("--max-elements", train.max_elements)->check(CLI::PositiveNumber);
  t->add_option("--diffusion-steps", train.diffusion_steps)->check(CLI::PositiveNumber);
  t->add_option("--checkpoint-every", train.checkpoint_every)->check(CLI::PositiveNumber);
  t->add_option("--log-every", train.log_every);
  t->add_option("--seed-init", train.seed_init);
  t->add_option("--seed-train", train.seed_train);
  t->add_option("--precision", train.precision);

  SampleArgs samp;
  auto* p = app.add_subcommand("sample", "Generate layouts from a trained checkpoint");
  p->add_option("--checkpoint", samp.checkpoint)->required();
  p->add_option("--labels", samp.labels, "Comma-separated label ids or names");
  p->add_option("--conditions", samp.conditions, "Dataset JSON whose layouts supply the attributes");
  p->add_option("--limit", samp.limit, "Use only the first N condition layouts");
  p->add_option("--count", samp.count, "Samples per condition")->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("--seed", samp.seed, "Sampling seed")->capture_default_str();
  p->add_option("--batch-size", samp.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("-o,--output", samp.output, "Output JSON (stdout when omitted)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute layout metrics");
  e->add_option("--generated", ev.generated)->required();
  e->add_option("--reference", ev.reference)->required();
  e->add_flag("--blt-y", ev.blt_y, "Add top/middle/bottom terms to the BLT alignment");
  e->add_flag("--trivial-features", ev.trivial_features, "Fréchet distance on geometry + label histogram features");
  e->add_option("--features-generated", ev.features_generated, "Feature JSON {provenance, features}");
  e->add_option("--features-reference", ev.features_reference);
  e->add_option("--max-elements", ev.max_elements)->capture_default_str()->check(CLI::PositiveNumber);
  e->add_option("-o,--output", ev.output, "Report JSON (stdout when omitted)");

  RenderArgs rd;
  auto* r = app.add_subcommand("render", "Render one layout as SVG");
  r->add_option("--input", rd.input)->required();
  r->add_option("--index", rd.index)->capture_default_str();
  r->add_option("--id", rd.id);
  r->add_option("-o,--output", rd.output, "SVG file (stdout when omitted)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(train, *t, out);
    if (p->parsed()) return cmd_sample(samp, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (r->parsed()) return cmd_render(rd, *r, out);
  } catch (const UsageError& ex) {
    return report_error(err, "usage", ex.what(), "", kExitUsage);
  } catch (const DataError& ex) {
    return report_error(err, "data", ex.what(), ex.subject(), kExitData);
  } catch (const NumericError& ex) {
    return report_error(err, "numeric", ex.what(), "", kExitNumeric);
  } catch (const nlohmann::json::exception& ex) {
    return report_error(err, "data", ex.what(), "", kExitData);
  } catch (const std::filesystem::filesystem_error& ex) {
    return report_error(err, "data", ex.what(), ex.path1().string(), kExitData);
  }
  return kExitUsage;
}

}  // namespace layoutdm
