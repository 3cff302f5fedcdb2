#include "layoutdm/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "layoutdm/error.hpp"
#include "layoutdm/metrics/matching.hpp"

namespace layoutdm {

namespace {

double intersection_area(const Corners& a, const Corners& b) {
  const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

double area(const Box& b) { return std::max(b.w * b.h, kMinArea); }

double neg_log_one_minus(double x) { return -std::log1p(-std::clamp(x, 0.0, 1.0 - 1e-9)); }

// Sum over elements of the pairwise overlap ratios.
double overlap_sum(const MetricFrame& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double own = area(f.boxes[i]);
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (j != i) total += intersection_area(f.corners[i], f.corners[j]) / own;
    }
  }
  return total;
}

}  // namespace

MetricFrame make_metric_frame(const Layout& layout) {
  MetricFrame f;
  f.boxes.reserve(layout.size());
  for (const auto& e : layout.elements) {
    Box unit = to_unit_frame(e.metric_geometry());
    unit.w = std::max(unit.w, kMinExtent);
    unit.h = std::max(unit.h, kMinExtent);
    f.boxes.push_back(unit);
    f.corners.push_back(to_corner_form(unit));
    if (e.mode() == AttributeMode::categorical) f.labels.push_back(e.label());
  }
  return f;
}

double alignment_kikuchi(const Layout& layout) {
  const MetricFrame f = make_metric_frame(layout);
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ci = f.corners[i].as_array();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 6; ++k) {
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) gap = std::min(gap, std::abs(ci[k] - f.corners[j].as_array()[k]));
      }
      best = std::min(best, neg_log_one_minus(gap));
    }
    total += best;
  }
  return 100.0 * total / static_cast<double>(n);
}

double alignment_blt_layout(const Layout& layout, bool include_y) {
  const MetricFrame f = make_metric_frame(layout);
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Corners& a = f.corners[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Corners& b = f.corners[j];
      best = std::min({best, std::abs(a.left - b.left), std::abs(a.center_x - b.center_x),
                       std::abs(a.right - b.right)});
      if (include_y) {
        best = std::min({best, std::abs(a.top - b.top), std::abs(a.center_y - b.center_y),
                         std::abs(a.bottom - b.bottom)});
      }
    }
    total += best;
  }
  return total;
}

double alignment_blt(std::span<const Layout> layouts, bool include_y) {
  if (layouts.empty()) throw DataError(DataErrorCode::invalid_argument, "alignment over an empty collection");
  double total = 0.0;
  for (const auto& l : layouts) total += alignment_blt_layout(l, include_y);
  return total / static_cast<double>(layouts.size());
}

double overlap_kikuchi(const Layout& layout) {
  const MetricFrame f = make_metric_frame(layout);
  if (f.size() == 0) return 0.0;
  return 100.0 * overlap_sum(f) / static_cast<double>(f.size());
}

double overlap_blt(const Layout& layout) { return overlap_sum(make_metric_frame(layout)); }

double perceptual_iou(const Layout& layout) {
  const MetricFrame f = make_metric_frame(layout);
  std::vector<Corners> clipped;
  std::vector<double> xs{0.0, 1.0}, ys{0.0, 1.0};
  for (const auto& c : f.corners) {
    Corners k = c;
    k.left = std::clamp(k.left, 0.0, 1.0);
    k.right = std::clamp(k.right, 0.0, 1.0);
    k.top = std::clamp(k.top, 0.0, 1.0);
    k.bottom = std::clamp(k.bottom, 0.0, 1.0);
    if (k.right <= k.left || k.bottom <= k.top) continue;
    clipped.push_back(k);
    xs.push_back(k.left);
    xs.push_back(k.right);
    ys.push_back(k.top);
    ys.push_back(k.bottom);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  double covered = 0.0, multiply_covered = 0.0;
  for (std::size_t xi = 0; xi + 1 < xs.size(); ++xi) {
    const double x0 = xs[xi], x1 = xs[xi + 1];
    for (std::size_t yi = 0; yi + 1 < ys.size(); ++yi) {
      const double y0 = ys[yi], y1 = ys[yi + 1];
      int count = 0;
      for (const auto& k : clipped) {
        if (k.left <= x0 && k.right >= x1 && k.top <= y0 && k.bottom >= y1) ++count;
      }
      const double cell = (x1 - x0) * (y1 - y0);
      if (count >= 1) covered += cell;
      if (count >= 2) multiply_covered += cell;
    }
  }
  return covered > 0.0 ? multiply_covered / covered : 0.0;
}

double box_iou(const Box& a, const Box& b) {
  const Corners ca = to_corner_form(a), cb = to_corner_form(b);
  const double inter = intersection_area(ca, cb);
  const double uni = std::max(a.w, 0.0) * std::max(a.h, 0.0) + std::max(b.w, 0.0) * std::max(b.h, 0.0) - inter;
  return uni > kMinArea ? inter / uni : 0.0;
}

std::vector<int> label_multiset(const Layout& layout) {
  std::vector<int> labels = layout.labels();
  std::sort(labels.begin(), labels.end());
  return labels;
}

double pair_max_iou(const Layout& a, const Layout& b) {
  if (label_multiset(a) != label_multiset(b)) {
    throw DataError(DataErrorCode::invalid_argument, "pair_max_iou needs identical label multisets",
                    a.id + " vs " + b.id);
  }
  const MetricFrame fa = make_metric_frame(a), fb = make_metric_frame(b);
  std::map<int, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < fa.size(); ++i) groups[fa.labels[i]].first.push_back(i);
  for (std::size_t j = 0; j < fb.size(); ++j) groups[fb.labels[j]].second.push_back(j);

  double total = 0.0;
  for (const auto& [_, members] : groups) {
    const auto& [ia, ib] = members;
    WeightMatrix w{ia.size(), ib.size(), std::vector<double>(ia.size() * ib.size())};
    for (std::size_t r = 0; r < ia.size(); ++r) {
      for (std::size_t c = 0; c < ib.size(); ++c) w.weights[r * ib.size() + c] = box_iou(fa.boxes[ia[r]], fb.boxes[ib[c]]);
    }
    total += max_weight_matching(w).total;
  }
  return total / static_cast<double>(fa.size());
}

double max_iou(std::span<const Layout> generated, std::span<const Layout> reference, std::size_t greedy_threshold) {
  if (generated.empty() || reference.empty()) {
    throw DataError(DataErrorCode::invalid_argument, "max_iou needs non-empty collections");
  }
  std::map<std::vector<int>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < generated.size(); ++i) groups[label_multiset(generated[i])].first.push_back(i);
  for (std::size_t j = 0; j < reference.size(); ++j) groups[label_multiset(reference[j])].second.push_back(j);

  double total = 0.0;
  for (const auto& [_, members] : groups) {
    const auto& [ig, ir] = members;
    if (ig.empty() || ir.empty()) continue;
    WeightMatrix w{ig.size(), ir.size(), std::vector<double>(ig.size() * ir.size())};
    for (std::size_t r = 0; r < ig.size(); ++r) {
      for (std::size_t c = 0; c < ir.size(); ++c) {
        w.weights[r * ir.size() + c] = pair_max_iou(generated[ig[r]], reference[ir[c]]);
      }
    }
    total += ig.size() * ir.size() > greedy_threshold ? greedy_matching(w).total : max_weight_matching(w).total;
  }
  return total / static_cast<double>(reference.size());
}

}  // namespace layoutdm
