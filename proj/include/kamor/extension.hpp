#pragma once

// Orthogonal extension: complete a factor F_l into a coefficient estimate by
// aligning it with the coefficients B_l of a known homologous structure.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/kam.hpp"

namespace kamor {

struct OrthogonalMatrix {
  int l = 0;
  Matrix O;
  /// Set when the smallest singular value of B^T F is below 1e-12 of the
  /// largest, i.e. the minimizer is not unique.
  bool degenerate = false;
};

inline constexpr double kProcrustesDegeneracy = 1e-12;

/// Orthogonal O minimizing ||F O - B||_F over O(d), O = V U^T where
/// B^T F = U S V^T. No determinant correction is applied.
inline OrthogonalMatrix procrustes(const Factor& F, const Matrix& B) {
  if (F.F.rows() != B.rows() || F.F.cols() != B.cols())
    throw DimensionError("procrustes: factor is " + std::to_string(F.F.rows()) +
                         "x" + std::to_string(F.F.cols()) + ", homolog is " +
                         std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  if (F.F.cols() != block_width(F.l))
    throw DimensionError("procrustes: factor width does not match 2l+1");
  const Matrix M = B.transpose() * F.F;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  OrthogonalMatrix out{F.l, svd.matrixV() * svd.matrixU().transpose(), false};
  const auto& s = svd.singularValues();
  out.degenerate = s.size() == 0 || s(s.size() - 1) < kProcrustesDegeneracy * s(0) ||
                   s(0) == 0.0;
  return out;
}

/// Â = F O with O from procrustes(F, B).
inline Matrix oe_estimate(const Factor& F, const Matrix& B) {
  return F.F * procrustes(F, B).O;
}

/// Weighted variant Â = 2 F O - B.
inline Matrix oe_estimate_weighted(const Factor& F, const Matrix& B) {
  return 2.0 * F.F * procrustes(F, B).O - B;
}

struct ExtensionResult {
  CoefficientSet estimate;
  std::vector<int> degenerate_degrees;
};

/// Degree-by-degree extension of a full set of autocorrelations.
inline ExtensionResult orthogonal_extension(const std::vector<Autocorrelation>& cls,
                                            const CoefficientSet& homolog,
                                            bool weighted = false) {
  homolog.validate();
  if (static_cast<int>(cls.size()) != homolog.L + 1)
    throw GridMismatchError("orthogonal_extension: " + std::to_string(cls.size()) +
                            " autocorrelations for band limit " +
                            std::to_string(homolog.L));
  ExtensionResult r{CoefficientSet::zeros(homolog.grid, homolog.L), {}};
  for (int l = 0; l <= homolog.L; ++l) {
    if (cls[l].l != l || cls[l].C.rows() != homolog.K())
      throw GridMismatchError("orthogonal_extension: C_" + std::to_string(l) +
                              " does not match the homolog grid");
    const Factor f = factor_autocorrelation(cls[l]);
    const Matrix& b = homolog.blocks[l];
    const OrthogonalMatrix o = procrustes(f, b);
    if (o.degenerate) r.degenerate_degrees.push_back(l);
    r.estimate.blocks[l] = weighted ? Matrix(2.0 * f.F * o.O - b) : Matrix(f.F * o.O);
  }
  return r;
}

}  // namespace kamor
