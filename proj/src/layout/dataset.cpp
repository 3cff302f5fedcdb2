#include "layoutdm/layout/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "layoutdm/error.hpp"
#include "layoutdm/numerics/rng.hpp"

namespace layoutdm {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where,
                    const std::string& subject) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw DataError(DataErrorCode::unknown_field, "unknown field '" + key + "' in " + where, subject);
    }
  }
}

const json& require_key(const json& obj, const char* key, const std::string& where, const std::string& subject) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(DataErrorCode::missing_field, "missing '" + std::string(key) + "' in " + where, subject);
  return *it;
}

Box parse_bbox(const json& v, const std::string& where, const std::string& subject) {
  if (!v.is_array() || v.size() != 4 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
    throw DataError(DataErrorCode::malformed_json, where + " must be an array of 4 numbers", subject);
  }
  Box b{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  if (!b.finite()) throw DataError(DataErrorCode::out_of_range, where + " is not finite", subject);
  return b;
}

json box_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

}  // namespace

std::size_t Dataset::total_elements() const {
  std::size_t n = 0;
  for (const auto& l : layouts) n += l.size();
  return n;
}

std::size_t Dataset::max_layout_size() const {
  std::size_t n = 0;
  for (const auto& l : layouts) n = std::max(n, l.size());
  return n;
}

std::vector<std::size_t> Dataset::label_histogram() const {
  std::vector<std::size_t> hist(schema.label_names.size(), 0);
  if (schema.mode != AttributeMode::categorical) return hist;
  for (const auto& l : layouts) {
    for (const auto& e : l.elements) ++hist.at(static_cast<std::size_t>(e.label()));
  }
  return hist;
}

Dataset parse_dataset(const json& doc, AttributeMode mode, std::size_t max_elements) {
  if (!doc.is_object()) throw DataError(DataErrorCode::malformed_json, "dataset root must be an object");
  reject_unknown(doc, {"canvas", "labels", "feature_dim", "layouts", "metadata"}, "dataset", "");

  Dataset ds;
  ds.schema.mode = mode;
  const json& canvas = require_key(doc, "canvas", "dataset", "");
  reject_unknown(canvas, {"width", "height"}, "canvas", "");
  try {
    ds.canvas = Canvas{require_key(canvas, "width", "canvas", "").get<double>(),
                       require_key(canvas, "height", "canvas", "").get<double>()};
  } catch (const json::type_error&) {
    throw DataError(DataErrorCode::malformed_json, "canvas width/height must be numbers");
  }
  if (!(ds.canvas.width > 0.0) || !(ds.canvas.height > 0.0) || !std::isfinite(ds.canvas.width) ||
      !std::isfinite(ds.canvas.height)) {
    throw DataError(DataErrorCode::out_of_range, "canvas dimensions must be positive and finite");
  }

  const bool has_labels = doc.contains("labels");
  const bool has_dim = doc.contains("feature_dim");
  std::map<std::string, int> vocabulary;
  bool build_vocabulary = false;
  if (mode == AttributeMode::categorical) {
    if (has_dim) throw DataError(DataErrorCode::attribute_mode_mismatch, "categorical mode but file has feature_dim");
    if (has_labels) {
      if (!doc["labels"].is_array()) throw DataError(DataErrorCode::malformed_json, "'labels' must be an array");
      for (const auto& name : doc["labels"]) {
        if (!name.is_string()) throw DataError(DataErrorCode::malformed_json, "label names must be strings");
        const auto s = name.get<std::string>();
        if (!vocabulary.emplace(s, static_cast<int>(ds.schema.label_names.size())).second) {
          throw DataError(DataErrorCode::malformed_json, "duplicate label name '" + s + "'");
        }
        ds.schema.label_names.push_back(s);
      }
    } else {
      build_vocabulary = true;
    }
  } else {
    if (has_labels) throw DataError(DataErrorCode::attribute_mode_mismatch, "continuous mode but file has labels");
    const json& dim = require_key(doc, "feature_dim", "dataset", "");
    if (!dim.is_number_integer() || dim.get<long long>() <= 0) {
      throw DataError(DataErrorCode::malformed_json, "feature_dim must be a positive integer");
    }
    ds.schema.feature_dim = dim.get<std::size_t>();
  }

  const json& layouts = require_key(doc, "layouts", "dataset", "");
  if (!layouts.is_array()) throw DataError(DataErrorCode::malformed_json, "'layouts' must be an array");
  std::set<std::string> seen_ids;
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    const json& jl = layouts[li];
    if (!jl.is_object()) throw DataError(DataErrorCode::malformed_json, "layout entry must be an object");
    std::string id = std::to_string(li);
    if (jl.contains("id")) {
      if (!jl["id"].is_string()) throw DataError(DataErrorCode::malformed_json, "layout id must be a string", id);
      id = jl["id"].get<std::string>();
    }
    reject_unknown(jl, {"id", "elements"}, "layout '" + id + "'", id);
    if (!seen_ids.insert(id).second) throw DataError(DataErrorCode::malformed_json, "duplicate layout id '" + id + "'", id);
    const json& elems = require_key(jl, "elements", "layout '" + id + "'", id);
    if (!elems.is_array()) throw DataError(DataErrorCode::malformed_json, "'elements' must be an array", id);
    if (elems.empty()) throw DataError(DataErrorCode::empty_layout, "layout '" + id + "' has no elements", id);
    if (elems.size() > max_elements) {
      throw DataError(DataErrorCode::too_many_elements,
                      "layout '" + id + "' has " + std::to_string(elems.size()) + " elements, limit is " +
                          std::to_string(max_elements),
                      id);
    }

    Layout raw;
    raw.id = id;
    for (std::size_t ei = 0; ei < elems.size(); ++ei) {
      const json& je = elems[ei];
      const std::string where = "layout '" + id + "' element " + std::to_string(ei);
      if (!je.is_object()) throw DataError(DataErrorCode::malformed_json, where + " must be an object", id);
      Element e;
      if (mode == AttributeMode::categorical) {
        reject_unknown(je, {"label", "bbox", "raw_bbox"}, where, id);
        const json& label = require_key(je, "label", where, id);
        if (label.is_number_integer()) {
          if (build_vocabulary) {
            throw DataError(DataErrorCode::label_out_of_vocabulary, where + ": integer label without a 'labels' list", id);
          }
          const auto k = label.get<long long>();
          if (k < 0 || k >= static_cast<long long>(ds.schema.label_names.size())) {
            throw DataError(DataErrorCode::label_out_of_vocabulary,
                            where + ": label " + std::to_string(k) + " outside vocabulary of " +
                                std::to_string(ds.schema.label_names.size()),
                            id);
          }
          e.attribute = static_cast<int>(k);
        } else if (label.is_string()) {
          const auto name = label.get<std::string>();
          auto it = vocabulary.find(name);
          if (it == vocabulary.end()) {
            if (!build_vocabulary) {
              throw DataError(DataErrorCode::label_out_of_vocabulary, where + ": unknown label '" + name + "'", id);
            }
            it = vocabulary.emplace(name, static_cast<int>(ds.schema.label_names.size())).first;
            ds.schema.label_names.push_back(name);
          }
          e.attribute = it->second;
        } else {
          throw DataError(DataErrorCode::malformed_json, where + ": label must be an integer or string", id);
        }
      } else {
        reject_unknown(je, {"feature", "bbox", "raw_bbox"}, where, id);
        const json& feature = require_key(je, "feature", where, id);
        if (!feature.is_array() || feature.size() != ds.schema.feature_dim ||
            !std::all_of(feature.begin(), feature.end(), [](const json& x) { return x.is_number(); })) {
          throw DataError(DataErrorCode::shape_mismatch,
                          where + ": feature must be " + std::to_string(ds.schema.feature_dim) + " numbers", id);
        }
        std::vector<double> f = feature.get<std::vector<double>>();
        if (!std::all_of(f.begin(), f.end(), [](double x) { return std::isfinite(x); })) {
          throw DataError(DataErrorCode::out_of_range, where + ": feature not finite", id);
        }
        e.attribute = std::move(f);
      }
      e.geometry = parse_bbox(require_key(je, "bbox", where, id), where + " bbox", id);
      if (je.contains("raw_bbox")) e.raw_geometry = parse_bbox(je["raw_bbox"], where + " raw_bbox", id);
      raw.elements.push_back(std::move(e));
    }
    ds.layouts.push_back(normalize_layout(raw, ds.canvas));
  }
  if (doc.contains("metadata")) ds.metadata = doc["metadata"];
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, AttributeMode mode, std::size_t max_elements) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorCode::io, "cannot open dataset " + path.string(), path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(DataErrorCode::malformed_json, path.string() + ": " + e.what(), path.string());
  }
  return parse_dataset(doc, mode, max_elements);
}

Dataset load_dataset_auto(const std::filesystem::path& path, std::size_t max_elements) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorCode::io, "cannot open dataset " + path.string(), path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(DataErrorCode::malformed_json, path.string() + ": " + e.what(), path.string());
  }
  const auto mode =
      doc.is_object() && doc.contains("feature_dim") ? AttributeMode::continuous : AttributeMode::categorical;
  return parse_dataset(doc, mode, max_elements);
}

json dataset_to_json(const Dataset& ds) {
  json doc;
  doc["canvas"] = {{"width", ds.canvas.width}, {"height", ds.canvas.height}};
  if (ds.schema.mode == AttributeMode::categorical) {
    doc["labels"] = ds.schema.label_names;
  } else {
    doc["feature_dim"] = ds.schema.feature_dim;
  }
  json layouts = json::array();
  for (const auto& l : ds.layouts) {
    json elems = json::array();
    for (const auto& e : l.elements) {
      json je;
      if (e.mode() == AttributeMode::categorical) {
        je["label"] = e.label();
      } else {
        je["feature"] = e.feature();
      }
      je["bbox"] = box_json(denormalize_box(e.geometry, ds.canvas));
      if (e.raw_geometry) je["raw_bbox"] = box_json(denormalize_box(*e.raw_geometry, ds.canvas));
      elems.push_back(std::move(je));
    }
    layouts.push_back({{"id", l.id}, {"elements", std::move(elems)}});
  }
  doc["layouts"] = std::move(layouts);
  if (!ds.metadata.is_null()) doc["metadata"] = ds.metadata;
  return doc;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::io, "cannot write " + path.string(), path.string());
  out << dataset_to_json(ds).dump(1) << '\n';
  if (!out) throw DataError(DataErrorCode::io, "write failed for " + path.string(), path.string());
}

SyntheticRule parse_synthetic_rule(const std::string& name) {
  if (name == "grid_by_label") return SyntheticRule::grid_by_label;
  if (name == "random_boxes") return SyntheticRule::random_boxes;
  throw DataError(DataErrorCode::invalid_argument, "unknown synthetic rule '" + name + "'");
}

const char* to_string(SyntheticRule rule) {
  return rule == SyntheticRule::grid_by_label ? "grid_by_label" : "random_boxes";
}

Box grid_box(int label, std::size_t num_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
    throw DataError(DataErrorCode::label_out_of_vocabulary, "grid_box label outside class range");
  }
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_classes))));
  const std::size_t rows = (num_classes + cols - 1) / cols;
  const auto k = static_cast<std::size_t>(label);
  const double cell_w = 1.0 / static_cast<double>(cols);
  const double cell_h = 1.0 / static_cast<double>(rows);
  const double fx = 0.5 + 0.12 * (static_cast<double>(k % 3) - 1.0);
  const double fy = 0.5 + 0.12 * (static_cast<double>((k + 1) % 3) - 1.0);
  const Box unit{(static_cast<double>(k % cols) + fx) * cell_w, (static_cast<double>(k / cols) + fy) * cell_h,
                 cell_w * (0.40 + 0.08 * static_cast<double>(k % 4)),
                 cell_h * (0.35 + 0.07 * static_cast<double>((k + 2) % 4))};
  return Box{2.0 * unit.cx - 1.0, 2.0 * unit.cy - 1.0, 2.0 * unit.w - 1.0, 2.0 * unit.h - 1.0};
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 1) throw DataError(DataErrorCode::invalid_argument, "num_classes must be at least 1");
  if (spec.num_layouts < 1) throw DataError(DataErrorCode::invalid_argument, "num_layouts must be at least 1");
  if (spec.min_elements < 1 || spec.max_elements < spec.min_elements) {
    throw DataError(DataErrorCode::invalid_argument, "element range must satisfy 1 <= min <= max");
  }
  if (!(spec.canvas.width > 0.0) || !(spec.canvas.height > 0.0)) {
    throw DataError(DataErrorCode::invalid_argument, "canvas dimensions must be positive");
  }

  RngStream rng{seed, 0};
  Dataset ds;
  ds.canvas = spec.canvas;
  ds.schema.mode = AttributeMode::categorical;
  for (std::size_t k = 0; k < spec.num_classes; ++k) ds.schema.label_names.push_back("class_" + std::to_string(k));

  const std::size_t span = spec.max_elements - spec.min_elements + 1;
  std::vector<int> pool(spec.num_classes);
  for (std::size_t i = 0; i < spec.num_layouts; ++i) {
    const std::size_t n = spec.min_elements + rng.uniform_index(span);
    Layout layout;
    layout.id = "synth-" + std::to_string(i);
    std::vector<int> labels(n);
    if (spec.rule == SyntheticRule::grid_by_label && n <= spec.num_classes) {
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t pick = j + rng.uniform_index(spec.num_classes - j);
        std::swap(pool[j], pool[pick]);
        labels[j] = pool[j];
      }
    } else {
      for (auto& l : labels) l = static_cast<int>(rng.uniform_index(spec.num_classes));
    }
    for (int label : labels) {
      Element e;
      e.attribute = label;
      if (spec.rule == SyntheticRule::grid_by_label) {
        e.geometry = grid_box(label, spec.num_classes);
      } else {
        const double w = 0.05 + 0.45 * rng.uniform();
        const double h = 0.05 + 0.45 * rng.uniform();
        const double cx = w / 2.0 + (1.0 - w) * rng.uniform();
        const double cy = h / 2.0 + (1.0 - h) * rng.uniform();
        e.geometry = Box{2.0 * cx - 1.0, 2.0 * cy - 1.0, 2.0 * w - 1.0, 2.0 * h - 1.0};
      }
      layout.elements.push_back(std::move(e));
    }
    ds.layouts.push_back(std::move(layout));
  }
  return ds;
}

}  // namespace layoutdm
