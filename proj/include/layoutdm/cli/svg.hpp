#pragma once

#include <string>
#include <vector>

#include "layoutdm/layout/layout.hpp"

namespace layoutdm {

struct Palette {
  std::vector<std::string> colors;  // "#rrggbb"

  static Palette standard();
  // Label k maps to colors[k % size]; continuous attributes use colors[0].
  const std::string& color_for(const Element& element) const;
};

// SVG 1.1 document with one <rect> and one <text> per element. Geometry is
// taken from the element's raw output when present, clamped to [-1,1],
// mapped to canvas units and clipped to the canvas.
std::string render_svg(const Layout& layout, const Palette& palette, Canvas canvas,
                       const std::vector<std::string>& label_names);

}  // namespace layoutdm
