#pragma once

// Helpers shared by the test suites. Nothing here calls into the code under
// test except for the plain data types.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

#include "kamor/kam.hpp"

namespace kamor::test_util {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of R's diagonal folded into Q).
inline Matrix random_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

inline double orthogonality_defect(const Matrix& o) {
  return (o * o.transpose() - Matrix::Identity(o.rows(), o.cols())).norm();
}

}  // namespace kamor::test_util
