#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "layoutdm/layout/dataset.hpp"
#include "layoutdm/metrics/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "layoutdm_integration";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the executable with `args`; stdout and stderr land in out.txt / err.txt.
int exe(const std::string& args) {
  const std::string cmd = std::string("'") + LAYOUTDM_EXE + "' " + args + " > '" + (kWork / "out.txt").string() +
                          "' 2> '" + (kWork / "err.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("process level pipeline") {
  fs::remove_all(kWork);
  fs::create_directories(kWork / "run");
  const fs::path data = kWork / "data.json", samples = kWork / "samples.json", report = kWork / "report.json";

  REQUIRE(exe("synth --layouts 24 --classes 3 --max-elements 4 --seed 11 -o " + q(data)) == 0);
  CHECK(slurp(kWork / "out.txt").find("layouts 24") != std::string::npos);

  fs::path cfg = kWork / "cfg.json";
  std::ofstream(cfg) << R"({"denoiser": {"d_model": 8, "num_layers": 1, "num_heads": 2, "ffn_dim": 16},
                            "diffusion": {"steps": 40}, "batch_size": 6, "max_steps": 5, "checkpoint_every": 2,
                            "seeds": {"init": 4, "train": 5}})";
  // flag overrides the config file
  REQUIRE(exe("train --config " + q(cfg) + " --steps 4 --dataset " + q(data) + " --output-dir " + q(kWork / "run")) == 0);
  const std::string losses = slurp(kWork / "run/loss.csv");
  CHECK(losses.substr(0, 10) == "step,loss\n");
  CHECK(std::count(losses.begin(), losses.end(), '\n') == 5);

  REQUIRE(exe("sample --checkpoint " + q(kWork / "run/model.ckpt") + " --conditions " + q(data) +
              " --limit 8 --count 3 --seed 9") == 0);
  const std::string sampled = slurp(kWork / "out.txt");
  std::ofstream(samples) << sampled;
  const json doc = json::parse(sampled);
  CHECK(doc["layouts"].size() == 24);
  CHECK(doc["metadata"]["config"]["max_steps"] == 4);
  CHECK(doc["metadata"]["config"]["denoiser"]["d_model"] == 8);

  // samples reload as a dataset with the training vocabulary
  const layoutdm::Dataset reloaded = layoutdm::load_dataset_auto(samples);
  CHECK(reloaded.schema.label_names.size() == 3);
  for (const auto& l : reloaded.layouts) CHECK(layoutdm::perceptual_iou(l) >= 0.0);

  REQUIRE(exe("eval --generated " + q(samples) + " --reference " + q(data) + " --trivial-features -o " + q(report)) == 0);
  const json rep = json::parse(slurp(report));
  CHECK(rep["generated"]["count"] == 24);
  CHECK(rep["reference"]["count"] == 24);
  CHECK(rep["frechet"]["value"].get<double>() >= 0.0);
  CHECK(rep["max_iou"]["convention"] == "kikuchi");

  REQUIRE(exe("render --input " + q(samples) + " --index 1 -o " + q(kWork / "one.svg")) == 0);
  CHECK(slurp(kWork / "one.svg").find("</svg>") != std::string::npos);
}

TEST_CASE("process exit codes") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  CHECK(exe("") == 2);
  CHECK(exe("synth --classes 0 -o " + q(kWork / "x.json")) == 2);
  CHECK(exe("train --dataset " + q(kWork / "missing.json")) == 3);
  std::ofstream(kWork / "bad.json") << "[1, 2";
  CHECK(exe("eval --generated " + q(kWork / "bad.json") + " --reference " + q(kWork / "bad.json")) == 3);
  CHECK(slurp(kWork / "out.txt").empty());
  CHECK(slurp(kWork / "err.txt").find("error (data)") != std::string::npos);
  CHECK(exe("--help") == 0);
}
