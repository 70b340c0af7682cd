#pragma once

// Coefficient-domain Fourier shell correlation and block error norms.
//
// By orthonormality of the harmonics, the correlation of two Fourier volumes
// over the shell |k| = k_j equals the normalized inner product of their
// coefficient vectors at k_j. The parity factors cancel (i * conj(i) = 1), so
// the real stored blocks can be used directly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/kam.hpp"

namespace kamor {

struct FscCurve {
  std::vector<double> ks;
  std::vector<double> values;
  std::vector<bool> flagged;  // zero denominator on this shell

  /// Mean over unflagged shells (0 if every shell is flagged).
  double mean() const {
    double acc = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!flagged[i]) acc += values[i], ++n;
    return n == 0 ? 0.0 : acc / n;
  }
};

inline constexpr double kFscFloor = 1e-300;

inline FscCurve fsc(const CoefficientSet& a, const CoefficientSet& b) {
  a.validate();
  b.validate();
  require_same_layout(a, b, "fsc");
  const int K = a.K();
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd na = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd nb = Eigen::VectorXd::Zero(K);
  for (int l = 0; l <= a.L; ++l) {
    cross += a.blocks[l].cwiseProduct(b.blocks[l]).rowwise().sum();
    na += a.blocks[l].rowwise().squaredNorm();
    nb += b.blocks[l].rowwise().squaredNorm();
  }
  FscCurve c;
  c.ks = a.grid.ks;
  for (int j = 0; j < K; ++j) {
    const double denom = std::sqrt(na(j) * nb(j));
    if (denom < kFscFloor) {
      c.values.push_back(0.0);
      c.flagged.push_back(true);
    } else {
      c.values.push_back(cross(j) / denom);
      c.flagged.push_back(false);
    }
  }
  return c;
}

/// CSV with header `k,fsc,flag`, full double precision.
inline void write_fsc_csv(std::ostream& os, const FscCurve& c) {
  const auto old = os.precision(17);
  os << "k,fsc,flag\n";
  for (std::size_t i = 0; i < c.values.size(); ++i)
    os << c.ks[i] << ',' << c.values[i] << ',' << (c.flagged[i] ? 1 : 0) << '\n';
  os.precision(old);
}

inline constexpr double kBlockErrorFloor = 1e-300;

/// ||Ahat - Atrue||_F / max(||Atrue||_F, floor).
inline double block_error(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw DimensionError("block_error: shape mismatch");
  return (estimate - truth).norm() / std::max(truth.norm(), kBlockErrorFloor);
}

inline std::vector<double> block_errors(const CoefficientSet& estimate,
                                        const CoefficientSet& truth) {
  require_same_layout(estimate, truth, "block_errors");
  std::vector<double> out;
  for (int l = 0; l <= truth.L; ++l)
    out.push_back(block_error(estimate.blocks[l], truth.blocks[l]));
  return out;
}

}  // namespace kamor
