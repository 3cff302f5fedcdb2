#include "layoutdm/metrics/frechet.hpp"

#include <Eigen/Dense>

#include "layoutdm/error.hpp"

namespace layoutdm {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.dim(0), t.dim(1));
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    for (std::size_t c = 0; c < t.dim(1); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.at(r, c);
  }
  return m;
}

void moments(const Matrix& x, Vector& mean, Matrix& cov) {
  mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

Matrix psd_sqrt(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void FeatureSet::validate() const {
  if (features.rank() != 2 || features.dim(1) == 0) {
    throw DataError(DataErrorCode::shape_mismatch, "feature set must be a non-empty 2-D matrix", provenance);
  }
  if (!features.all_finite()) throw DataError(DataErrorCode::out_of_range, "feature set has non-finite values", provenance);
  if (count() < dim() + 1) {
    throw DataError(DataErrorCode::invalid_argument,
                    "feature set needs at least feat_dim + 1 = " + std::to_string(dim() + 1) + " rows, has " +
                        std::to_string(count()),
                    provenance);
  }
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim()) {
    throw DataError(DataErrorCode::shape_mismatch,
                    "feature dimensions differ: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  Vector mu_a, mu_b;
  Matrix cov_a, cov_b;
  moments(to_matrix(a.features), mu_a, cov_a);
  moments(to_matrix(b.features), mu_b, cov_b);

  const Matrix root_a = psd_sqrt(cov_a);
  Matrix inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(inner, Eigen::EigenvaluesOnly);
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) trace_root += std::sqrt(std::max(eig.eigenvalues()(i), 0.0));

  const double mean_term = (mu_a - mu_b).squaredNorm();
  const double value = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * trace_root;
  if (!std::isfinite(value)) throw NumericError("frechet distance is not finite");
  return value;
}

FeatureSet trivial_layout_features(std::span<const Layout> layouts, std::size_t pad_to, std::size_t num_classes) {
  FeatureSet fs;
  fs.provenance = "trivial:geometry+label-histogram";
  const std::size_t dim = pad_to * 4 + num_classes;
  fs.features = Tensor(Shape{layouts.size(), dim});
  for (std::size_t r = 0; r < layouts.size(); ++r) {
    const auto& l = layouts[r];
    if (l.size() > pad_to) {
      throw DataError(DataErrorCode::too_many_elements, "layout larger than feature padding", l.id);
    }
    auto row = fs.features.row(r);
    for (std::size_t n = 0; n < l.size(); ++n) {
      const auto g = l.elements[n].metric_geometry().as_array();
      std::copy(g.begin(), g.end(), row.begin() + static_cast<std::ptrdiff_t>(n * 4));
      if (l.elements[n].mode() == AttributeMode::categorical) {
        const auto k = static_cast<std::size_t>(l.elements[n].label());
        if (k < num_classes) row[pad_to * 4 + k] += 1.0;
      }
    }
  }
  return fs;
}

}  // namespace layoutdm
