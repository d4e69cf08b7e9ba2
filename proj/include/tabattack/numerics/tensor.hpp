#pragma once

#include <Eigen/Core>

#include <string>

#include "tabattack/error.hpp"

namespace tabattack {

// All dense values are row-major 2-D arrays of doubles. Scalars are 1x1,
// row vectors 1xn. Higher ranks are never needed by the models.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using RowVector = RowVectorT<double>;
using Vector = VectorT<double>;
using IndexMatrix = MatrixT<int>;

using Tensor = Matrix;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

/// Throws NumericError when any element is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.derived().allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + what);
  }
}

inline Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace tabattack
