#pragma once

// Per-degree coefficient blocks, their autocorrelation matrices, low-rank
// factors, estimation-noise injection and the even/odd parity convention.
//
// Parity convention: block l stores the real matrix Ã_l with
//   A_l = Ã_l        for even l
//   A_l = i * Ã_l    for odd l
// so every downstream computation is real. Since A_l A_l^* = Ã_l Ã_l^T for
// both parities, the autocorrelation is real and symmetric.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/harmonics.hpp"

namespace kamor {

using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr int block_width(int l) { return 2 * l + 1; }

/// Radial frequencies at which shells are sampled; strictly increasing, >= 0.
struct RadialGrid {
  std::vector<double> ks;

  int K() const { return static_cast<int>(ks.size()); }

  void validate() const {
    if (ks.empty()) throw InputError("RadialGrid: need at least one shell");
    if (ks.front() < 0.0) throw InputError("RadialGrid: negative frequency");
    for (std::size_t i = 1; i < ks.size(); ++i)
      if (!(ks[i] > ks[i - 1]))
        throw InputError("RadialGrid: frequencies must be strictly increasing");
  }

  /// K evenly spaced shells on [k_min, k_max]; K = 1 gives {k_max}.
  static RadialGrid uniform(double k_min, double k_max, int K) {
    if (K < 1) throw InputError("RadialGrid: K must be >= 1");
    RadialGrid g;
    if (K == 1) {
      g.ks = {k_max};
    } else {
      for (int j = 0; j < K; ++j)
        g.ks.push_back(k_min + (k_max - k_min) * j / (K - 1));
    }
    g.validate();
    return g;
  }

  friend bool operator==(const RadialGrid&, const RadialGrid&) = default;
};

/// Per-degree real coefficient blocks Ã_l of shape K x (2l+1).
struct CoefficientSet {
  RadialGrid grid;
  int L = 0;
  std::vector<Matrix> blocks;

  int K() const { return grid.K(); }

  static CoefficientSet zeros(RadialGrid grid, int L) {
    CoefficientSet c;
    c.grid = std::move(grid);
    c.L = L;
    for (int l = 0; l <= L; ++l)
      c.blocks.push_back(Matrix::Zero(c.grid.K(), block_width(l)));
    return c;
  }

  void validate() const {
    grid.validate();
    if (L < 0) throw InputError("CoefficientSet: negative band limit");
    if (static_cast<int>(blocks.size()) != L + 1)
      throw DimensionError("CoefficientSet: expected " + std::to_string(L + 1) +
                           " blocks, got " + std::to_string(blocks.size()));
    for (int l = 0; l <= L; ++l) {
      const Matrix& b = blocks[l];
      if (b.rows() != K() || b.cols() != block_width(l))
        throw DimensionError("CoefficientSet: block " + std::to_string(l) +
                             " has shape " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
    }
  }

  /// A_l with the parity factor applied.
  ComplexMatrix complex_block(int l) const {
    ComplexMatrix out = blocks[l].cast<complex>();
    if (l % 2 == 1) out *= complex(0.0, 1.0);
    return out;
  }

  /// Complex coefficients of shell j, ready for synthesize_on_sphere.
  ShellCoefficients shell(int j) const {
    ShellCoefficients s(L);
    for (int l = 0; l <= L; ++l)
      for (int m = -l; m <= l; ++m) {
        const double v = blocks[l](j, m + l);
        s(l, m) = l % 2 == 0 ? complex(v, 0.0) : complex(0.0, v);
      }
    return s;
  }
};

inline void require_same_layout(const CoefficientSet& a, const CoefficientSet& b,
                                const char* what) {
  if (!(a.grid == b.grid))
    throw GridMismatchError(std::string(what) + ": radial grids differ");
  if (a.L != b.L)
    throw GridMismatchError(std::string(what) + ": band limits differ (" +
                            std::to_string(a.L) + " vs " + std::to_string(b.L) +
                            ")");
}

struct Autocorrelation {
  int l = 0;
  Matrix C;
};

struct Factor {
  int l = 0;
  Matrix F;
};

/// C_l = Ã_l Ã_l^T for every degree.
inline std::vector<Autocorrelation> autocorrelation(const CoefficientSet& coeffs) {
  coeffs.validate();
  std::vector<Autocorrelation> out;
  out.reserve(coeffs.blocks.size());
  for (int l = 0; l <= coeffs.L; ++l) {
    const Matrix& a = coeffs.blocks[l];
    Matrix c = a * a.transpose();
    out.push_back({l, 0.5 * (c + c.transpose())});
  }
  return out;
}

/// Relative asymmetry ||C - C^T||_F / ||C||_F (0 for a zero matrix).
inline double asymmetry(const Matrix& c) {
  const double n = c.norm();
  return n == 0.0 ? 0.0 : (c - c.transpose()).norm() / n;
}

/// Eigenvalue clipping onto the PSD cone.
inline Matrix psd_project(const Matrix& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (c + c.transpose()));
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Matrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

inline constexpr double kSymmetryTolerance = 1e-10;

/// Rank-(2l+1) factor F with F F^T equal to the PSD part of C truncated to
/// its top 2l+1 eigenvalues. Columns are ordered by descending eigenvalue;
/// when K < 2l+1 the trailing columns are zero.
inline Factor factor_autocorrelation(const Autocorrelation& cl) {
  if (cl.C.rows() != cl.C.cols())
    throw DimensionError("factor_autocorrelation: C_l is not square");
  if (asymmetry(cl.C) > kSymmetryTolerance)
    throw InputError("factor_autocorrelation: C_" + std::to_string(cl.l) +
                     " asymmetric (relative " + std::to_string(asymmetry(cl.C)) +
                     ")");
  const Eigen::Index K = cl.C.rows();
  const Eigen::Index d = block_width(cl.l);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cl.C + cl.C.transpose()));
  Factor f{cl.l, Matrix::Zero(K, d)};
  // eigenvalues ascend; walk from the top
  for (Eigen::Index c = 0; c < std::min(K, d); ++c) {
    const Eigen::Index src = K - 1 - c;
    const double lam = std::max(es.eigenvalues()(src), 0.0);
    f.F.col(c) = std::sqrt(lam) * es.eigenvectors().col(src);
  }
  return f;
}

inline std::vector<Factor> factor_all(const std::vector<Autocorrelation>& cls) {
  std::vector<Factor> out;
  out.reserve(cls.size());
  for (const auto& c : cls) out.push_back(factor_autocorrelation(c));
  return out;
}

/// C + eps ||C||_F E / ||E||_F projected back onto the PSD cone, where E is
/// symmetric with i.i.d. standard normal upper triangle drawn from `seed`.
inline Autocorrelation perturb_autocorrelation(const Autocorrelation& cl,
                                               double eps, std::uint64_t seed) {
  if (eps < 0.0) throw InputError("perturb_autocorrelation: eps must be >= 0");
  const double cn = cl.C.norm();
  if (eps == 0.0 || cn == 0.0) return cl;
  const Eigen::Index K = cl.C.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix e(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = i; j < K; ++j) e(i, j) = e(j, i) = normal(rng);
  const double en = e.norm();
  return {cl.l, psd_project(cl.C + (eps * cn / en) * e)};
}

/// Perturbs every degree with a per-degree seed derived from `seed`.
inline std::vector<Autocorrelation> perturb_all(
    const std::vector<Autocorrelation>& cls, double eps, std::uint64_t seed) {
  std::vector<Autocorrelation> out;
  out.reserve(cls.size());
  std::vector<std::uint64_t> seeds(cls.size());
  std::mt19937_64 gen(seed);
  for (auto& s : seeds) s = gen();
  for (std::size_t i = 0; i < cls.size(); ++i)
    out.push_back(perturb_autocorrelation(cls[i], eps, seeds[i]));
  return out;
}

struct ParityReport {
  std::vector<double> residuals;  // per degree
  double max_residual = 0.0;
};

/// Fraction of each block that violates the parity convention: the
/// imaginary part for even l, the real part for odd l. The denominator is
/// floored at 1e-14 times the largest block norm in the set.
inline ParityReport parity_check(const std::vector<ComplexMatrix>& raw_blocks) {
  double largest = 0.0;
  for (const auto& b : raw_blocks) largest = std::max(largest, b.norm());
  const double floor = 1e-14 * largest;
  ParityReport r;
  for (std::size_t l = 0; l < raw_blocks.size(); ++l) {
    const ComplexMatrix& b = raw_blocks[l];
    const double wrong = l % 2 == 0 ? b.imag().norm() : b.real().norm();
    const double denom = std::max(b.norm(), floor);
    const double res = wrong == 0.0 ? 0.0 : wrong / denom;
    r.residuals.push_back(res);
    r.max_residual = std::max(r.max_residual, res);
  }
  return r;
}

/// Keeps the parity-consistent part of raw complex blocks as real blocks.
inline CoefficientSet from_raw_blocks(const RadialGrid& grid,
                                      const std::vector<ComplexMatrix>& raw) {
  CoefficientSet c;
  c.grid = grid;
  c.L = static_cast<int>(raw.size()) - 1;
  for (std::size_t l = 0; l < raw.size(); ++l)
    c.blocks.push_back(l % 2 == 0 ? Matrix(raw[l].real()) : Matrix(raw[l].imag()));
  c.validate();
  return c;
}

}  // namespace kamor
