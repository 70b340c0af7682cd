#pragma once

// Small dense SDP solver for
//
//     minimize Tr(W Q)  subject to  Q >= 0,  Q_ii = I (i = 1, 2, 3)
//
// where Q is 3d x 3d with d x d blocks, plus spectral rounding of the
// solution back to three orthogonal matrices.
//
// The solver is a primal-dual interior point method with the HKM search
// direction and Mehrotra predictor-corrector steps. The constraints are the
// m = 3 d(d+1)/2 upper-triangle entries of the diagonal blocks; each
// iteration forms and factors the m x m Schur complement
//   M_kl = Tr(A_k X A_l Z^{-1}).
// The start X = I, Z = W + 2 ||W|| I is primal and dual feasible.
//
// Interior point iterates stall around a 1e-10 relative gap when the optimum
// has rank d. The solver therefore polishes: it factors the iterate as
// Q = Y Y^T with orthogonal d x d blocks Y_i, runs Gauss-Newton on the blocks
// to drive Tr(W Y Y^T) down, and keeps the rank-d point only if the dual
// certificate S = W - blockdiag(Lambda_i), Lambda_i = sym((W Y Y^T)_ii),
// is PSD within tolerance. Such a point is optimal for the SDP itself.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/extension.hpp"
#include "kamor/kam.hpp"

namespace kamor {

struct SdpProblem {
  int d = 1;
  Matrix W;  // 3d x 3d, symmetric PSD
};

struct SdpOptions {
  double tol_feas = 1e-8;
  double tol_obj = 1e-8;
  int max_iters = 50000;
};

struct SdpSolution {
  Matrix Q;
  double objective = 0.0;
  double dual_bound = 0.0;
  double feasibility_residual = 0.0;  // max_i ||Q_ii - I||_F
  double min_eigenvalue = 0.0;
  int iterations = 0;
  bool converged = false;
};

class SdpNotConvergedError : public std::runtime_error {
 public:
  SdpNotConvergedError(const std::string& msg, SdpSolution best)
      : std::runtime_error(msg), best_iterate(std::move(best)) {}
  SdpSolution best_iterate;
};

/// W = G^T G with G = [F1 | -F2 | D], so that for Q_ij = O_i O_j^T
///   Tr(W Q) = ||F1 O1 - F2 O2 + D O3||_F^2.
inline SdpProblem build_or_problem(const Factor& F1, const Factor& F2,
                                   const Matrix& D) {
  const Eigen::Index K = F1.F.rows();
  const Eigen::Index d = F1.F.cols();
  if (F2.F.rows() != K || F2.F.cols() != d || D.rows() != K || D.cols() != d)
    throw DimensionError("build_or_problem: F1, F2 and D must share shape " +
                         std::to_string(K) + "x" + std::to_string(d));
  Matrix G(K, 3 * d);
  G << F1.F, -F2.F, D;
  Matrix W = G.transpose() * G;
  return {static_cast<int>(d), 0.5 * (W + W.transpose())};
}

namespace detail {

inline double max_diag_block_residual(const Matrix& Q, int d) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    r = std::max(r, (Q.block(i * d, i * d, d, d) - Matrix::Identity(d, d)).norm());
  return r;
}

inline void set_identity_blocks(Matrix& X, int d) {
  for (int i = 0; i < 3; ++i) X.block(i * d, i * d, d, d).setIdentity();
}

/// Congruence D^{-1/2} Q D^{-1/2} with D = blockdiag(Q_ii): keeps Q PSD and
/// makes the diagonal blocks exactly I. Returns false if some Q_ii is not
/// positive definite.
inline bool normalize_diagonal_blocks(const Matrix& Q, int d, Matrix& out) {
  Matrix S = Matrix::Zero(3 * d, 3 * d);
  for (int i = 0; i < 3; ++i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Q.block(i * d, i * d, d, d));
    if (es.eigenvalues().minCoeff() <= 0.5) return false;
    S.block(i * d, i * d, d, d) =
        es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
  }
  out = S * Q * S;
  out = 0.5 * (out + out.transpose());
  set_identity_blocks(out, d);
  return true;
}

/// Index pairs (a, b), a <= b, of the constrained entries.
struct BlockConstraints {
  std::vector<std::pair<int, int>> entries;
  Eigen::VectorXd rhs;

  explicit BlockConstraints(int d) {
    for (int i = 0; i < 3; ++i)
      for (int p = 0; p < d; ++p)
        for (int q = p; q < d; ++q) entries.emplace_back(i * d + p, i * d + q);
    rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t k = 0; k < entries.size(); ++k)
      if (entries[k].first == entries[k].second) rhs(static_cast<Eigen::Index>(k)) = 1.0;
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(entries.size()); }

  /// A(X)_k = <A_k, X> with A_k = sym(e_a e_b^T).
  Eigen::VectorXd apply(const Matrix& X) const {
    Eigen::VectorXd out(size());
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto [a, b] = entries[static_cast<std::size_t>(k)];
      out(k) = 0.5 * (X(a, b) + X(b, a));
    }
    return out;
  }

  /// A^T(y) = sum_k y_k A_k.
  Matrix adjoint(const Eigen::VectorXd& y, Eigen::Index n) const {
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto [a, b] = entries[static_cast<std::size_t>(k)];
      if (a == b) {
        out(a, a) += y(k);
      } else {
        out(a, b) += 0.5 * y(k);
        out(b, a) += 0.5 * y(k);
      }
    }
    return out;
  }

  /// M_kl = Tr(A_k X A_l Zi).
  Matrix schur(const Matrix& X, const Matrix& Zi) const {
    const Eigen::Index m = size();
    Matrix M(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto [a, b] = entries[static_cast<std::size_t>(k)];
      for (Eigen::Index l = k; l < m; ++l) {
        const auto [c, e] = entries[static_cast<std::size_t>(l)];
        const double v = 0.25 * (X(b, c) * Zi(e, a) + X(b, e) * Zi(c, a) +
                                 X(a, c) * Zi(e, b) + X(a, e) * Zi(c, b));
        M(k, l) = v;
        M(l, k) = v;
      }
    }
    return M;
  }
};

/// Largest step in (0, inf] keeping S + alpha dS positive semidefinite.
inline double max_step(const Matrix& S, const Matrix& dS) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix Linv = llt.matrixL().solve(Matrix::Identity(S.rows(), S.cols()));
  Matrix T = Linv * dS * Linv.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (T + T.transpose()), Eigen::EigenvaluesOnly);
  const double lam = es.eigenvalues()(0);
  return lam >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lam;
}

inline Matrix sym(const Matrix& A) { return 0.5 * (A + A.transpose()); }

}  // namespace detail

inline SdpSolution finalize_solution(const SdpProblem& prob, const Matrix& X) {
  const int d = prob.d;
  SdpSolution sol;
  Matrix Q;
  if (!detail::normalize_diagonal_blocks(X, d, Q)) Q = detail::sym(X);
  sol.Q = Q;
  sol.objective = prob.W.cwiseProduct(Q).sum();
  sol.feasibility_residual = detail::max_diag_block_residual(Q, d);
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  sol.min_eigenvalue = es.eigenvalues()(0);
  return sol;
}

namespace detail {

/// Top-d spectral factor of Q with every d x d block replaced by its polar
/// orthogonal factor. `degenerate_blocks` counts blocks with a singular
/// value below `rank_tol` times the largest.
inline Matrix orthogonal_block_factor(const Matrix& Q, int d, double rank_tol,
                                      int* degenerate_blocks = nullptr) {
  const Eigen::Index n = 3 * d;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(Q));
  Matrix R(n, d);
  for (int c = 0; c < d; ++c) {
    const Eigen::Index src = n - 1 - c;
    R.col(c) = std::sqrt(std::max(es.eigenvalues()(src), 0.0)) * es.eigenvectors().col(src);
  }
  Matrix Y(n, d);
  int bad = 0;
  for (int i = 0; i < 3; ++i) {
    Eigen::JacobiSVD<Matrix> svd(R.middleRows(i * d, d),
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(0) == 0.0 || sv(d - 1) < rank_tol * sv(0)) ++bad;
    Y.middleRows(i * d, d) = svd.matrixU() * svd.matrixV().transpose();
  }
  if (degenerate_blocks) *degenerate_blocks = bad;
  return Y;
}

inline Matrix skew(const Matrix& A) { return 0.5 * (A - A.transpose()); }

/// Gauss-Newton on f(Y) = ||G Y||_F^2, G^T G = W, over Y with orthogonal
/// blocks. Y_3 is held fixed (the right-multiplication gauge); the other two
/// blocks move as Y_i <- Y_i polar(I + Omega_i) with skew Omega_i from a
/// matrix-free CGLS solve of the linearized problem.
inline Matrix gauss_newton_blocks(const Matrix& W, Matrix Y, int d, int max_outer = 100) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(W));
  const Matrix G = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                   es.eigenvectors().transpose();
  const Matrix Y3t = Y.middleRows(2 * d, d).transpose();
  Y = Y * Y3t;  // gauge: Y_3 = I
  Y.middleRows(2 * d, d).setIdentity();

  const auto objective = [&](const Matrix& Yc) { return (G * Yc).squaredNorm(); };
  double f = objective(Y);
  const double fscale = std::max(W.norm(), 1e-300);

  for (int outer = 0; outer < max_outer && f > 1e-30 * fscale; ++outer) {
    const Matrix P1 = G.middleCols(0, d) * Y.middleRows(0, d);
    const Matrix P2 = G.middleCols(d, d) * Y.middleRows(d, d);
    const Matrix r = G * Y;
    // CGLS for min || r + P1 O1 + P2 O2 || over skew O1, O2
    const auto apply = [&](const Matrix& o1, const Matrix& o2) { return Matrix(P1 * o1 + P2 * o2); };
    Matrix x1 = Matrix::Zero(d, d), x2 = Matrix::Zero(d, d);
    Matrix res = -r;
    Matrix s1 = skew(P1.transpose() * res), s2 = skew(P2.transpose() * res);
    Matrix p1 = s1, p2 = s2;
    double gamma = s1.squaredNorm() + s2.squaredNorm();
    const double gamma0 = gamma;
    const int max_inner = std::max(10, 2 * d * (d - 1));
    for (int k = 0; k < max_inner && gamma > 1e-28 * gamma0 && gamma > 0.0; ++k) {
      const Matrix q = apply(p1, p2);
      const double qq = q.squaredNorm();
      if (qq <= 0.0) break;
      const double alpha = gamma / qq;
      x1 += alpha * p1;
      x2 += alpha * p2;
      res -= alpha * q;
      s1 = skew(P1.transpose() * res);
      s2 = skew(P2.transpose() * res);
      const double gnew = s1.squaredNorm() + s2.squaredNorm();
      const double beta = gnew / gamma;
      gamma = gnew;
      p1 = s1 + beta * p1;
      p2 = s2 + beta * p2;
    }
    if (x1.squaredNorm() + x2.squaredNorm() == 0.0) break;

    bool improved = false;
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
      Matrix Yn = Y;
      const Matrix Id = Matrix::Identity(d, d);
      for (int i = 0; i < 2; ++i) {
        const Matrix& om = i == 0 ? x1 : x2;
        Eigen::JacobiSVD<Matrix> svd(Id + t * om, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Yn.middleRows(i * d, d) =
            Y.middleRows(i * d, d) * svd.matrixU() * svd.matrixV().transpose();
      }
      const double fn = objective(Yn);
      if (fn < f) {
        improved = f - fn > 1e-15 * f;
        Y = Yn;
        f = fn;
        break;
      }
    }
    if (!improved) break;
  }
  return Y;
}

struct Certificate {
  double dual_bound = 0.0;
  double min_eigenvalue = 0.0;  // of S = W - blockdiag(Lambda)
};

inline Certificate certify_low_rank(const Matrix& W, const Matrix& Y, int d) {
  const Matrix WY = W * Y;
  Matrix S = W;
  double trace = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Matrix lam = sym(WY.middleRows(i * d, d) * Y.middleRows(i * d, d).transpose());
    S.block(i * d, i * d, d, d) -= lam;
    trace += lam.trace();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S), Eigen::EigenvaluesOnly);
  Certificate c;
  c.min_eigenvalue = es.eigenvalues()(0);
  c.dual_bound = trace + 3.0 * d * std::min(c.min_eigenvalue, 0.0);
  return c;
}

}  // namespace detail

/// Rank-d polish of an approximate solution. Returns true and fills `out`
/// when the polished point carries a dual certificate with gap at most
/// tol_obj ||W||_F.
inline bool polish_rank_restricted(const SdpProblem& prob, const Matrix& Q,
                                   const SdpOptions& opts, SdpSolution& out) {
  const int d = prob.d;
  Matrix Y = detail::orthogonal_block_factor(Q, d, 0.0);
  Y = detail::gauss_newton_blocks(prob.W, Y, d);
  const detail::Certificate cert = detail::certify_low_rank(prob.W, Y, d);
  const double wnorm = prob.W.norm();
  SdpSolution sol;
  sol.Q = detail::sym(Y * Y.transpose());
  detail::set_identity_blocks(sol.Q, d);
  sol.objective = prob.W.cwiseProduct(sol.Q).sum();
  sol.dual_bound = cert.dual_bound;
  sol.feasibility_residual = detail::max_diag_block_residual(sol.Q, d);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sol.Q, Eigen::EigenvaluesOnly);
  sol.min_eigenvalue = es.eigenvalues()(0);
  if (sol.objective - cert.dual_bound > opts.tol_obj * wnorm) return false;
  if (sol.feasibility_residual > opts.tol_feas || sol.min_eigenvalue < -opts.tol_feas)
    return false;
  sol.converged = true;
  out = sol;
  return true;
}

/// Solves the block-diagonal-constrained SDP. Deterministic for fixed
/// inputs. Throws SdpNotConvergedError when neither the interior point
/// iterate nor its certified rank-d polish meets the tolerances.
inline SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opts = {}) {
  const int d = prob.d;
  const Eigen::Index n = 3 * d;
  if (d < 1 || prob.W.rows() != n || prob.W.cols() != n)
    throw DimensionError("solve_sdp: W must be 3d x 3d");
  if (asymmetry(prob.W) > kSymmetryTolerance)
    throw InputError("solve_sdp: W is not symmetric");
  if (opts.max_iters < 1) throw InputError("solve_sdp: max_iters must be >= 1");

  const double wnorm = prob.W.norm();
  if (wnorm == 0.0) {
    SdpSolution sol = finalize_solution(prob, Matrix::Identity(n, n));
    sol.converged = true;
    return sol;
  }
  const Matrix W = detail::sym(prob.W) / wnorm;
  const detail::BlockConstraints A(d);
  const Eigen::Index m = A.size();
  const Matrix I = Matrix::Identity(n, n);

  Matrix X = I;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k)
    if (A.entries[static_cast<std::size_t>(k)].first ==
        A.entries[static_cast<std::size_t>(k)].second)
      y(k) = -2.0;
  Matrix Z = W - A.adjoint(y, n);

  constexpr double kStepFraction = 0.98;
  // the interior point phase aims below the reported tolerances
  const double gap_target = 0.1 * opts.tol_obj;
  const double feas_target = 0.1 * opts.tol_feas;

  SdpSolution best;
  double best_score = std::numeric_limits<double>::infinity();
  bool reached = false;
  int it = 0;

  for (; it < opts.max_iters; ++it) {
    const Eigen::VectorXd rp = A.rhs - A.apply(X);
    const Matrix Rd = W - A.adjoint(y, n) - Z;
    const double pobj = W.cwiseProduct(X).sum();
    const double dobj = A.rhs.dot(y);
    const double mu = X.cwiseProduct(Z).sum() / static_cast<double>(n);
    const double rel_gap = n * mu / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double score = std::max({rel_gap / opts.tol_obj, rp.norm() / opts.tol_feas,
                                   Rd.norm() / opts.tol_feas});
    if (score < best_score) {
      best_score = score;
      best = finalize_solution(prob, X);
      best.dual_bound = wnorm * dobj;
      best.iterations = it;
    }
    if (rel_gap <= gap_target && rp.norm() <= feas_target && Rd.norm() <= feas_target) {
      reached = true;
      break;
    }

    Eigen::LLT<Matrix> zchol(Z);
    if (zchol.info() != Eigen::Success) break;
    const Matrix Zi = zchol.solve(I);
    const Matrix M = A.schur(X, Zi);
    Eigen::LLT<Matrix> mchol(M);
    Eigen::LDLT<Matrix> mldlt;
    const bool use_llt = mchol.info() == Eigen::Success;
    if (!use_llt) mldlt.compute(M);
    const auto solve_m = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
      return use_llt ? Eigen::VectorXd(mchol.solve(rhs)) : Eigen::VectorXd(mldlt.solve(rhs));
    };

    const Matrix XRdZi = X * Rd * Zi;
    // search direction for the linearized complementarity dX Z + X dZ = T
    const auto direction = [&](const Matrix& T, Matrix& dX, Eigen::VectorXd& dy,
                               Matrix& dZ) {
      const Matrix TZi = T * Zi;
      dy = solve_m(rp - A.apply(TZi) + A.apply(XRdZi));
      dZ = Rd - A.adjoint(dy, n);
      dX = detail::sym(TZi - X * dZ * Zi);
    };

    Matrix dXa, dZa;
    Eigen::VectorXd dya;
    direction(-X * Z, dXa, dya, dZa);
    const double ap = std::min(1.0, detail::max_step(X, dXa));
    const double ad = std::min(1.0, detail::max_step(Z, dZa));
    const double mu_aff =
        (X + ap * dXa).cwiseProduct(Z + ad * dZa).sum() / static_cast<double>(n);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    Matrix dX, dZ;
    Eigen::VectorXd dy;
    direction(sigma * mu * I - X * Z - dXa * dZa, dX, dy, dZ);
    const double sp = std::min(1.0, kStepFraction * detail::max_step(X, dX));
    const double sd = std::min(1.0, kStepFraction * detail::max_step(Z, dZ));
    if (!(sp > 0.0) || !(sd > 0.0) || !dX.allFinite() || !dZ.allFinite()) break;
    X = detail::sym(X + sp * dX);
    y += sd * dy;
    Z = detail::sym(Z + sd * dZ);
  }

  SdpSolution polished;
  if (polish_rank_restricted(prob, best.Q, opts, polished)) {
    polished.iterations = best.iterations;
    return polished;
  }
  // accept a stalled iterate if it meets the reported tolerances
  const bool acceptable = reached || best_score <= 1.0;
  if (acceptable && best.feasibility_residual <= opts.tol_feas &&
      best.min_eigenvalue >= -opts.tol_feas) {
    best.converged = true;
    return best;
  }
  throw SdpNotConvergedError("solve_sdp: tolerances not met after " + std::to_string(it) +
                                 " iterations (best score " + std::to_string(best_score) +
                                 ")",
                             best);
}

struct Rounding {
  std::array<OrthogonalMatrix, 3> O;
  double rank_proxy = 0.0;  // lambda_{d+1} / lambda_d of Q
  bool degenerate = false;
  std::vector<std::string> warnings;
};

inline constexpr double kRoundingRankTolerance = 1e-10;
inline constexpr double kRoundingGapTolerance = 1e-8;

/// Spectral rounding: R = top-d eigenvectors scaled by sqrt(eigenvalues),
/// split into three d x d blocks, each replaced by its polar orthogonal factor.
inline Rounding round_sdp(const SdpSolution& sol, int d) {
  const Eigen::Index n = 3 * d;
  if (sol.Q.rows() != n || sol.Q.cols() != n)
    throw DimensionError("round_sdp: Q must be 3d x 3d");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sol.Q + sol.Q.transpose()));
  const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
  Matrix R(n, d);
  for (int c = 0; c < d; ++c) {
    const Eigen::Index src = n - 1 - c;
    R.col(c) = std::sqrt(std::max(lam(src), 0.0)) * es.eigenvectors().col(src);
  }
  Rounding out;
  const double top = std::max(lam(n - 1), 0.0);
  const double lam_d = std::max(lam(n - d), 0.0);
  const double lam_d1 = std::max(lam(n - d - 1), 0.0);
  out.rank_proxy = lam_d > 0.0 ? lam_d1 / lam_d : 1.0;
  if (lam_d - lam_d1 <= kRoundingGapTolerance * top) {
    out.degenerate = true;
    out.warnings.push_back("degenerate rounding: top-" + std::to_string(d) +
                           " eigenspace of Q is not unique");
  }
  for (int i = 0; i < 3; ++i) {
    const Matrix Ri = R.middleRows(i * d, d);
    Eigen::JacobiSVD<Matrix> svd(Ri, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    if (s(0) == 0.0 || s(d - 1) < kRoundingRankTolerance * s(0)) {
      out.degenerate = true;
      out.warnings.push_back("degenerate rounding: block " + std::to_string(i + 1) +
                             " is numerically rank deficient");
    }
    out.O[i] = {(d - 1) / 2, svd.matrixU() * svd.matrixV().transpose(), false};
  }
  return out;
}

}  // namespace kamor
