#include "layoutdm/layout/layout.hpp"

#include <algorithm>
#include <cmath>

#include "layoutdm/error.hpp"

namespace layoutdm {

namespace {

double to_model(double v, double range) { return 2.0 * v / range - 1.0; }
double from_model(double v, double range) { return (v + 1.0) * range / 2.0; }

}  // namespace

bool Box::finite() const {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h);
}

const char* to_string(AttributeMode mode) {
  return mode == AttributeMode::categorical ? "categorical" : "continuous";
}

std::vector<int> Layout::labels() const {
  std::vector<int> out;
  out.reserve(elements.size());
  for (const auto& e : elements) out.push_back(e.label());
  return out;
}

Box normalize_box(const Box& raw, Canvas canvas) {
  return Box{to_model(raw.cx, canvas.width), to_model(raw.cy, canvas.height), to_model(raw.w, canvas.width),
             to_model(raw.h, canvas.height)};
}

Box denormalize_box(const Box& box, Canvas canvas) {
  return Box{from_model(box.cx, canvas.width), from_model(box.cy, canvas.height), from_model(box.w, canvas.width),
             from_model(box.h, canvas.height)};
}

Box clamp_box(const Box& box, double lo, double hi) {
  return Box{std::clamp(box.cx, lo, hi), std::clamp(box.cy, lo, hi), std::clamp(box.w, lo, hi),
             std::clamp(box.h, lo, hi)};
}

Layout normalize_layout(const Layout& raw, Canvas canvas) {
  if (!(canvas.width > 0.0) || !(canvas.height > 0.0)) {
    throw DataError(DataErrorCode::out_of_range, "canvas dimensions must be positive", raw.id);
  }
  Layout out = raw;
  for (std::size_t i = 0; i < raw.elements.size(); ++i) {
    const Box& b = raw.elements[i].geometry;
    const bool ok = b.finite() && b.cx >= 0.0 && b.cx <= canvas.width && b.cy >= 0.0 && b.cy <= canvas.height &&
                    b.w >= 0.0 && b.w <= canvas.width && b.h >= 0.0 && b.h <= canvas.height;
    if (!ok) {
      throw DataError(DataErrorCode::out_of_range,
                      "layout '" + raw.id + "' element " + std::to_string(i) + " bbox outside the canvas",
                      raw.id + "#" + std::to_string(i));
    }
    out.elements[i].geometry = normalize_box(b, canvas);
    if (raw.elements[i].raw_geometry) {
      out.elements[i].raw_geometry = normalize_box(*raw.elements[i].raw_geometry, canvas);
    }
  }
  return out;
}

Layout denormalize_layout(const Layout& layout, Canvas canvas) {
  Layout out = layout;
  for (auto& e : out.elements) {
    e.geometry = denormalize_box(e.geometry, canvas);
    if (e.raw_geometry) e.raw_geometry = denormalize_box(*e.raw_geometry, canvas);
  }
  return out;
}

Box to_unit_frame(const Box& model) {
  return Box{(model.cx + 1.0) / 2.0, (model.cy + 1.0) / 2.0, (model.w + 1.0) / 2.0, (model.h + 1.0) / 2.0};
}

Corners to_corner_form(const Box& unit) {
  return Corners{unit.cx - unit.w / 2.0, unit.cy - unit.h / 2.0, unit.cx,
                 unit.cy,                unit.cx + unit.w / 2.0, unit.cy + unit.h / 2.0};
}

std::size_t Batch::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

Batch pad_batch(std::span<const Layout> layouts) {
  if (layouts.empty()) throw DataError(DataErrorCode::invalid_argument, "cannot batch zero layouts");
  Batch batch;
  batch.size = layouts.size();
  for (const auto& l : layouts) {
    if (l.elements.empty()) throw DataError(DataErrorCode::empty_layout, "layout has no elements", l.id);
    batch.max_elements = std::max(batch.max_elements, l.elements.size());
  }
  batch.mode = layouts.front().elements.front().mode();
  std::size_t attr_dim = 0;
  if (batch.mode == AttributeMode::continuous) attr_dim = layouts.front().elements.front().feature().size();
  for (const auto& l : layouts) {
    for (const auto& e : l.elements) {
      if (e.mode() != batch.mode) {
        throw DataError(DataErrorCode::attribute_mode_mismatch, "batch mixes categorical and continuous layouts",
                        l.id);
      }
      if (batch.mode == AttributeMode::continuous && e.feature().size() != attr_dim) {
        throw DataError(DataErrorCode::shape_mismatch, "feature dimensions differ within batch", l.id);
      }
    }
  }

  const std::size_t B = batch.size, N = batch.max_elements;
  batch.geometry = Tensor(Shape{B, N, 4});
  batch.mask.assign(B * N, 0);
  if (batch.mode == AttributeMode::categorical) {
    batch.labels.assign(B * N, 0);
  } else {
    batch.features = Tensor(Shape{B, N, attr_dim});
  }
  for (std::size_t b = 0; b < B; ++b) {
    const auto& elems = layouts[b].elements;
    for (std::size_t n = 0; n < elems.size(); ++n) {
      const std::size_t slot = b * N + n;
      const auto g = elems[n].geometry.as_array();
      std::copy(g.begin(), g.end(), batch.geometry.row(slot).begin());
      batch.mask[slot] = 1;
      if (batch.mode == AttributeMode::categorical) {
        batch.labels[slot] = elems[n].label();
      } else {
        std::copy(elems[n].feature().begin(), elems[n].feature().end(), batch.features.row(slot).begin());
      }
    }
  }
  return batch;
}

std::vector<Layout> unpad_batch(const Batch& batch, const Tensor* geometry) {
  const Tensor& geo = geometry ? *geometry : batch.geometry;
  if (geo.size() != batch.size * batch.max_elements * 4) {
    throw DataError(DataErrorCode::shape_mismatch, "geometry does not match batch shape");
  }
  std::vector<Layout> out(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) {
    out[b].id = std::to_string(b);
    for (std::size_t n = 0; n < batch.max_elements; ++n) {
      const std::size_t slot = b * batch.max_elements + n;
      if (!batch.mask[slot]) continue;
      Element e;
      e.geometry = Box::from(geo.row(slot));
      if (batch.mode == AttributeMode::categorical) {
        e.attribute = batch.labels[slot];
      } else {
        auto f = batch.features.row(slot);
        e.attribute = std::vector<double>(f.begin(), f.end());
      }
      out[b].elements.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace layoutdm
