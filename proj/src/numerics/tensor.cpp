#include "layoutdm/numerics/tensor.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "layoutdm/error.hpp"

namespace layoutdm {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DataError(DataErrorCode::shape_mismatch,
                    std::string(op) + " of " + shape_to_string(a.shape()) + " and " +
                        shape_to_string(b.shape()));
  }
}

}  // namespace

const char* to_string(DataErrorCode code) {
  switch (code) {
    case DataErrorCode::io: return "io error";
    case DataErrorCode::malformed_json: return "malformed json";
    case DataErrorCode::unknown_field: return "unknown field";
    case DataErrorCode::missing_field: return "missing field";
    case DataErrorCode::empty_layout: return "empty layout";
    case DataErrorCode::too_many_elements: return "too many elements";
    case DataErrorCode::label_out_of_vocabulary: return "label out of vocabulary";
    case DataErrorCode::out_of_range: return "out of range";
    case DataErrorCode::attribute_mode_mismatch: return "attribute mode mismatch";
    case DataErrorCode::shape_mismatch: return "shape mismatch";
    case DataErrorCode::invalid_argument: return "invalid argument";
  }
  return "data error";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw DataError(DataErrorCode::shape_mismatch,
                    std::to_string(data_.size()) + " values for shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DataError(DataErrorCode::shape_mismatch,
                    "cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + what);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "compare");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  ConstMap A(a.data(), m, k);
  ConstMap B(b.data(), k, n);
  MutMap C(c.data(), m, n);
  if (accumulate) {
    C.noalias() += A * B;
  } else {
    C.noalias() = A * B;
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  ConstMap A(a.data(), k, m);
  ConstMap B(b.data(), k, n);
  MutMap C(c.data(), m, n);
  if (accumulate) {
    C.noalias() += A.transpose() * B;
  } else {
    C.noalias() = A.transpose() * B;
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  ConstMap A(a.data(), m, k);
  ConstMap B(b.data(), n, k);
  MutMap C(c.data(), m, n);
  if (accumulate) {
    C.noalias() += A * B.transpose();
  } else {
    C.noalias() = A * B.transpose();
  }
}

}  // namespace layoutdm
