#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "layoutdm/layout/layout.hpp"

namespace layoutdm {

struct AttributeSchema {
  AttributeMode mode = AttributeMode::categorical;
  std::vector<std::string> label_names;  // categorical
  std::size_t feature_dim = 0;           // continuous

  friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;
};

// Layouts are held in normalized model space.
struct Dataset {
  Canvas canvas;
  AttributeSchema schema;
  std::vector<Layout> layouts;
  // Free-form metadata carried through the "metadata" key (sampler output).
  nlohmann::json metadata;

  std::size_t total_elements() const;
  std::size_t max_layout_size() const;
  std::vector<std::size_t> label_histogram() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Dataset file schema, bbox in canvas units:
//   {"canvas": {"width": W, "height": H},
//    "labels": ["text", ...],
//    "layouts": [{"id": "...", "elements": [{"label": 0, "bbox": [cx, cy, w, h]}]}]}
// Continuous mode uses "feature_dim" instead of "labels" and "feature" instead
// of "label". Labels may be integer ids into "labels" or label-name strings;
// without a "labels" list the vocabulary is built in first-seen order.
// Optional keys: element "raw_bbox" (unclamped, canvas units) and top-level
// "metadata".
Dataset parse_dataset(const nlohmann::json& doc, AttributeMode mode, std::size_t max_elements = kDefaultMaxElements);
Dataset load_dataset(const std::filesystem::path& path, AttributeMode mode,
                     std::size_t max_elements = kDefaultMaxElements);
// Mode is taken from the document ("feature_dim" present means continuous).
Dataset load_dataset_auto(const std::filesystem::path& path, std::size_t max_elements = kDefaultMaxElements);

nlohmann::json dataset_to_json(const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

enum class SyntheticRule { grid_by_label, random_boxes };

SyntheticRule parse_synthetic_rule(const std::string& name);
const char* to_string(SyntheticRule rule);

struct SyntheticSpec {
  std::size_t num_layouts = 512;
  std::size_t num_classes = 4;
  std::size_t min_elements = 2;
  std::size_t max_elements = 4;
  SyntheticRule rule = SyntheticRule::grid_by_label;
  Canvas canvas{100.0, 100.0};
};

// Model-space box that grid_by_label assigns to class `label`: the label-th
// cell (row-major) of a ceil(sqrt(C)) column grid, with a class-dependent
// offset and size inside the cell so that distinct classes never share an
// edge or center coordinate.
Box grid_box(int label, std::size_t num_classes);

// Pure function of (spec, seed). grid_by_label draws distinct labels when the
// element count allows it; random_boxes draws labels and boxes uniformly
// inside the canvas.
Dataset make_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace layoutdm
