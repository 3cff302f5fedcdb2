#include "layoutdm/cli/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace layoutdm {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Palette Palette::standard() {
  return Palette{{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                  "#bcbd22", "#17becf"}};
}

const std::string& Palette::color_for(const Element& element) const {
  if (element.mode() != AttributeMode::categorical) return colors.front();
  return colors[static_cast<std::size_t>(element.label()) % colors.size()];
}

std::string render_svg(const Layout& layout, const Palette& palette, Canvas canvas,
                       const std::vector<std::string>& label_names) {
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(canvas.width)
      << "\" height=\"" << num(canvas.height) << "\" viewBox=\"0 0 " << num(canvas.width) << ' '
      << num(canvas.height) << "\">\n"
      << "  <title>" << escape_xml(layout.id) << "</title>\n"
      << "  <path d=\"M0 0 H" << num(canvas.width) << " V" << num(canvas.height)
      << " H0 Z\" fill=\"#ffffff\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  const double font = std::max(6.0, std::min(canvas.width, canvas.height) / 30.0);
  for (const auto& e : layout.elements) {
    const Box b = denormalize_box(clamp_box(e.metric_geometry()), canvas);
    const double x0 = std::clamp(b.cx - b.w / 2.0, 0.0, canvas.width);
    const double x1 = std::clamp(b.cx + b.w / 2.0, 0.0, canvas.width);
    const double y0 = std::clamp(b.cy - b.h / 2.0, 0.0, canvas.height);
    const double y1 = std::clamp(b.cy + b.h / 2.0, 0.0, canvas.height);
    const std::string& color = palette.color_for(e);
    std::string label = "feature";
    if (e.mode() == AttributeMode::categorical) {
      const auto k = static_cast<std::size_t>(e.label());
      label = k < label_names.size() ? label_names[k] : std::to_string(k);
    }
    svg << "  <rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0) << "\" height=\""
        << num(y1 - y0) << "\" fill=\"" << color << "\" fill-opacity=\"0.45\" stroke=\"" << color
        << "\" stroke-width=\"1\"/>\n"
        << "  <text x=\"" << num(x0 + 1.0) << "\" y=\"" << num(y0 + font) << "\" font-family=\"sans-serif\" font-size=\""
        << num(font) << "\" fill=\"#000000\">" << escape_xml(label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace layoutdm
