#pragma once

#include <span>
#include <string>

#include "layoutdm/layout/layout.hpp"
#include "layoutdm/numerics/tensor.hpp"

namespace layoutdm {

// One feature row per layout. `provenance` names the extractor.
struct FeatureSet {
  Tensor features;  // [num_layouts, feat_dim]
  std::string provenance;

  std::size_t count() const { return features.rank() == 2 ? features.dim(0) : 0; }
  std::size_t dim() const { return features.rank() == 2 ? features.dim(1) : 0; }
  // Throws DataError unless finite and count >= dim + 1.
  void validate() const;
};

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the trace of the
// square root taken from the eigenvalues of the symmetric PSD matrix
// S_a^(1/2) S_b S_a^(1/2). Covariances use the n-1 normalization. Negative
// eigenvalues (rounding) are truncated to zero.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

// Smoke-test extractor: padded model-space geometry flattened to
// pad_to * 4 values, followed by a label histogram of num_classes bins.
// Not comparable to classifier-based FID values.
FeatureSet trivial_layout_features(std::span<const Layout> layouts, std::size_t pad_to, std::size_t num_classes);

}  // namespace layoutdm
