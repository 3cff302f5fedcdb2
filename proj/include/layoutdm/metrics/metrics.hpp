#pragma once

#include <span>
#include <string>
#include <vector>

#include "layoutdm/layout/layout.hpp"
#include "layoutdm/numerics/tensor.hpp"

namespace layoutdm {

// Minimum box extent in the metric frame; keeps ratios and logs finite.
inline constexpr double kMinExtent = 1e-6;
inline constexpr double kMinArea = 1e-12;

// A layout in the unit-square frame [0,1]^2. Geometry is the element's raw
// sampler output when available, otherwise its stored geometry.
struct MetricFrame {
  std::vector<Box> boxes;
  std::vector<Corners> corners;
  std::vector<int> labels;  // empty for continuous attributes

  std::size_t size() const { return boxes.size(); }
};

MetricFrame make_metric_frame(const Layout& layout);

// Kikuchi convention: mean over elements of min_k -log(1 - Δ_k), Δ_k the
// nearest-neighbour gap of coordinate k in (left, center x, right, top,
// center y, bottom), times 100. Single-element layouts score 0.
double alignment_kikuchi(const Layout& layout);

// BLT convention for one layout: sum over elements of the nearest-neighbour
// L1 gap among left / center / right x coordinates. `include_y` adds the top
// / middle / bottom gaps to the minimum.
double alignment_blt_layout(const Layout& layout, bool include_y = false);
// Mean of alignment_blt_layout over the collection. Throws on an empty input.
double alignment_blt(std::span<const Layout> layouts, bool include_y = false);

// (1/N) sum_i sum_{j != i} |s_i ∩ s_j| / |s_i|, times 100.
double overlap_kikuchi(const Layout& layout);
// Same double sum with neither the 1/N factor nor the 100 scale.
double overlap_blt(const Layout& layout);

// Area covered by two or more boxes over area covered by at least one, within
// the unit canvas; computed exactly on the compressed coordinate grid.
double perceptual_iou(const Layout& layout);

double box_iou(const Box& a, const Box& b);

// Optimal one-to-one element matching by IoU within each label group; mean
// matched IoU over all elements. Throws DataError when label multisets differ.
double pair_max_iou(const Layout& a, const Layout& b);

// Max IoU between collections: layouts are matched one-to-one among pairs with
// identical label multisets, maximizing the summed pair_max_iou. Divides by the
// reference size. Groups with more than `greedy_threshold` candidate pairs use
// greedy matching.
inline constexpr std::size_t kGreedyPairThreshold = 2000 * 2000;
double max_iou(std::span<const Layout> generated, std::span<const Layout> reference,
               std::size_t greedy_threshold = kGreedyPairThreshold);

// Sorted label multiset, the grouping key for max_iou.
std::vector<int> label_multiset(const Layout& layout);

}  // namespace layoutdm
