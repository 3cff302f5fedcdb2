#pragma once

#include <cstddef>
#include <vector>

namespace layoutdm {

// Dense weight matrix, row-major [rows, cols].
struct WeightMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;

  double at(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
};

struct Matching {
  // row_to_col[r] is the matched column or -1.
  std::vector<long> row_to_col;
  double total = 0.0;
};

// Maximum-weight assignment of min(rows, cols) pairs (Hungarian algorithm with
// potentials, O(n^2 m)).
Matching max_weight_matching(const WeightMatrix& w);

// Greedy: repeatedly take the heaviest remaining pair. Ties break by lower
// row, then lower column.
Matching greedy_matching(const WeightMatrix& w);

}  // namespace layoutdm
