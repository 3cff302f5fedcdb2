#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "layoutdm/numerics/tensor.hpp"

namespace layoutdm {

// Center x/y, width, height. Units depend on context: canvas units before
// normalization, [-1,1] model space after it, [0,1] in the metric frame.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  std::array<double, 4> as_array() const { return {cx, cy, w, h}; }
  static Box from(std::span<const double> v) { return Box{v[0], v[1], v[2], v[3]}; }
  bool finite() const;

  friend bool operator==(const Box&, const Box&) = default;
};

struct Canvas {
  double width = 1.0;
  double height = 1.0;

  friend bool operator==(const Canvas&, const Canvas&) = default;
};

enum class AttributeMode { categorical, continuous };

const char* to_string(AttributeMode mode);

// Categorical label id or continuous feature vector.
using Attribute = std::variant<int, std::vector<double>>;

struct Element {
  Box geometry;
  Attribute attribute = 0;
  // Unclamped sampler output, when the element came from generated data.
  std::optional<Box> raw_geometry;

  AttributeMode mode() const {
    return std::holds_alternative<int>(attribute) ? AttributeMode::categorical : AttributeMode::continuous;
  }
  int label() const { return std::get<int>(attribute); }
  const std::vector<double>& feature() const { return std::get<std::vector<double>>(attribute); }
  // Raw geometry when present, otherwise the stored geometry.
  const Box& metric_geometry() const { return raw_geometry ? *raw_geometry : geometry; }

  friend bool operator==(const Element&, const Element&) = default;
};

struct Layout {
  std::string id;
  std::vector<Element> elements;

  std::size_t size() const noexcept { return elements.size(); }
  std::vector<int> labels() const;

  friend bool operator==(const Layout&, const Layout&) = default;
};

// Default maximum element count per layout.
inline constexpr std::size_t kDefaultMaxElements = 36;

// Affine map of canvas units onto [-1,1]: v -> 2 v / range - 1 with range W
// for cx and w, H for cy and h. Throws DataError(out_of_range) naming the
// element index when a coordinate lies outside [0, range].
Layout normalize_layout(const Layout& raw, Canvas canvas);
// Inverse map; values outside [-1,1] are carried through unclamped.
Layout denormalize_layout(const Layout& layout, Canvas canvas);

Box normalize_box(const Box& raw, Canvas canvas);
Box denormalize_box(const Box& box, Canvas canvas);
Box clamp_box(const Box& box, double lo = -1.0, double hi = 1.0);

// Model space [-1,1] to the unit-square metric frame: v -> (v+1)/2.
Box to_unit_frame(const Box& model);

// Left, top, center x, center y, right, bottom of a unit-frame box.
struct Corners {
  double left = 0.0;
  double top = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  std::array<double, 6> as_array() const { return {left, top, center_x, center_y, right, bottom}; }
};

Corners to_corner_form(const Box& unit);

// Padded view of a set of layouts with the same attribute mode.
struct Batch {
  std::size_t size = 0;          // B
  std::size_t max_elements = 0;  // N
  AttributeMode mode = AttributeMode::categorical;
  Tensor geometry;               // [B, N, 4], zero in padded slots
  std::vector<int> labels;       // [B*N], categorical mode, 0 in padded slots
  Tensor features;               // [B, N, attr_dim], continuous mode
  Mask mask;                     // [B*N]

  std::size_t attribute_dim() const { return mode == AttributeMode::continuous ? features.cols() : 0; }
  std::size_t valid_count() const;
  bool valid(std::size_t b, std::size_t n) const { return mask[b * max_elements + n] != 0; }
};

// N is the largest layout in the input. Throws DataError on an empty input,
// an empty layout, or mixed attribute modes.
Batch pad_batch(std::span<const Layout> layouts);
// Strip padding; element attributes come from the batch, geometry from
// `geometry` (defaults to the batch's own). Ids are "0", "1", ...
std::vector<Layout> unpad_batch(const Batch& batch, const Tensor* geometry = nullptr);

}  // namespace layoutdm
