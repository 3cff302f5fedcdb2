#pragma once

#include <optional>

#include "json.hpp"
#include "layoutdm/layout/dataset.hpp"
#include "layoutdm/metrics/frechet.hpp"

namespace layoutdm {

struct EvalOptions {
  bool blt_include_y = false;
  // Fréchet distance is reported only when both feature sets are supplied or
  // the trivial extractor is requested.
  std::optional<FeatureSet> generated_features;
  std::optional<FeatureSet> reference_features;
  bool trivial_features = false;
};

// Throws DataError(attribute_mode_mismatch) when the two datasets do not share
// a label vocabulary (categorical) or feature width (continuous).
void require_compatible(const Dataset& generated, const Dataset& reference);

// Metric report: "generated" and "reference" sections with per-metric
// aggregates and per-layout values, collection-level max_iou and frechet, each
// number tagged with its convention ("kikuchi" or "blt").
nlohmann::json evaluate(const Dataset& generated, const Dataset& reference, const EvalOptions& options);

}  // namespace layoutdm
