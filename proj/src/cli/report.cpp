#include "layoutdm/cli/report.hpp"

#include <functional>

#include "layoutdm/error.hpp"
#include "layoutdm/metrics/metrics.hpp"

namespace layoutdm {

using nlohmann::json;

namespace {

json per_layout_metric(const std::vector<Layout>& layouts, const char* convention,
                       const std::function<double(const Layout&)>& metric) {
  json values = json::array();
  double total = 0.0;
  for (const auto& l : layouts) {
    const double v = metric(l);
    values.push_back(v);
    total += v;
  }
  return {{"convention", convention},
          {"mean", layouts.empty() ? 0.0 : total / static_cast<double>(layouts.size())},
          {"per_layout", values}};
}

json section(const Dataset& d, const EvalOptions& options) {
  const auto& ls = d.layouts;
  json ids = json::array();
  for (const auto& l : ls) ids.push_back(l.id);
  json metrics;
  metrics["alignment_kikuchi"] = per_layout_metric(ls, "kikuchi", alignment_kikuchi);
  metrics["overlap_kikuchi"] = per_layout_metric(ls, "kikuchi", overlap_kikuchi);
  json blt_alignment = per_layout_metric(
      ls, "blt", [&](const Layout& l) { return alignment_blt_layout(l, options.blt_include_y); });
  blt_alignment["include_y"] = options.blt_include_y;
  metrics["alignment_blt"] = blt_alignment;
  metrics["overlap_blt"] = per_layout_metric(ls, "blt", overlap_blt);
  metrics["perceptual_iou"] = per_layout_metric(ls, "blt", perceptual_iou);
  return {{"count", ls.size()}, {"ids", ids}, {"metrics", metrics}};
}

}  // namespace

void require_compatible(const Dataset& generated, const Dataset& reference) {
  if (generated.schema.mode != reference.schema.mode) {
    throw DataError(DataErrorCode::attribute_mode_mismatch, "generated and reference attribute modes differ");
  }
  if (generated.schema.mode == AttributeMode::categorical &&
      generated.schema.label_names != reference.schema.label_names) {
    throw DataError(DataErrorCode::attribute_mode_mismatch, "generated and reference label vocabularies differ");
  }
  if (generated.schema.mode == AttributeMode::continuous &&
      generated.schema.feature_dim != reference.schema.feature_dim) {
    throw DataError(DataErrorCode::attribute_mode_mismatch, "generated and reference feature widths differ");
  }
}

json evaluate(const Dataset& generated, const Dataset& reference, const EvalOptions& options) {
  require_compatible(generated, reference);
  if (generated.layouts.empty() || reference.layouts.empty()) {
    throw DataError(DataErrorCode::invalid_argument, "evaluation needs non-empty collections");
  }
  json report;
  report["generated"] = section(generated, options);
  report["reference"] = section(reference, options);

  if (generated.schema.mode == AttributeMode::categorical) {
    report["max_iou"] = {{"convention", "kikuchi"}, {"value", max_iou(generated.layouts, reference.layouts)}};
  } else {
    report["max_iou"] = nullptr;
  }

  std::optional<FeatureSet> fa = options.generated_features, fb = options.reference_features;
  if (fa.has_value() != fb.has_value()) {
    throw UsageError("Fréchet distance needs feature files for both collections");
  }
  if (!fa && options.trivial_features) {
    const std::size_t pad = std::max(generated.max_layout_size(), reference.max_layout_size());
    const std::size_t classes = generated.schema.label_names.size();
    fa = trivial_layout_features(generated.layouts, pad, classes);
    fb = trivial_layout_features(reference.layouts, pad, classes);
  }
  if (fa) {
    report["frechet"] = {{"convention", "kikuchi"},
                         {"value", frechet_distance(*fa, *fb)},
                         {"generated_features", fa->provenance},
                         {"reference_features", fb->provenance}};
  } else {
    report["frechet"] = nullptr;
  }
  return report;
}

}  // namespace layoutdm
