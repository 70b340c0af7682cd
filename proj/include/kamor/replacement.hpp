#pragma once

// Orthogonal replacement: recover two unknown structures from their
// autocorrelations and the known coefficients of their difference.
//
// Per degree, with D = A2 - A1 = F2 O2 - F1 O1, the slack matrix O3
// homogenizes the system to F1 O1 - F2 O2 + D O3 = 0, which is relaxed to the
// SDP in sdp.hpp. The estimates are A1 = F1 O1 O3^T and A2 = F2 O2 O3^T.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/kam.hpp"
#include "kamor/sdp.hpp"

namespace kamor {

struct ResolutionGate {
  bool pass = false;
  double limit = 0.0;  // K / 2
};

/// Only degrees with l <= K/2 can be determined by replacement.
inline ResolutionGate resolution_gate(int K, int l) {
  return {2 * l <= K, K / 2.0};
}

/// Largest degree that passes the gate.
inline int max_resolvable_degree(int K) { return K / 2; }

/// Rank proxy above which the SDP solution is reported as not rank d.
inline constexpr double kRankProxyWarn = 1e-3;

struct BlockDiagnostics {
  int l = 0;
  double sdp_objective = 0.0;
  double feasibility_residual = 0.0;
  double rank_proxy = 0.0;
  double difference_residual = 0.0;
  bool difference_residual_is_absolute = false;
  int sdp_iterations = 0;
  std::vector<std::string> warnings;
};

struct BlockRetrieval {
  Matrix A1;
  Matrix A2;
  BlockDiagnostics diagnostics;
};

inline BlockRetrieval or_retrieve_block(const Factor& F1, const Factor& F2,
                                        const Matrix& D, const SdpOptions& opts = {}) {
  if (F1.l != F2.l) throw DimensionError("or_retrieve_block: factors of different degree");
  const int K = static_cast<int>(F1.F.rows());
  const int l = F1.l;
  if (!resolution_gate(K, l).pass) throw ResolutionLimitError(l, K);

  const SdpProblem prob = build_or_problem(F1, F2, D);
  const SdpSolution sol = solve_sdp(prob, opts);
  const Rounding rnd = round_sdp(sol, prob.d);
  const Matrix& O1 = rnd.O[0].O;
  const Matrix& O2 = rnd.O[1].O;
  const Matrix& O3 = rnd.O[2].O;

  BlockRetrieval out;
  out.A1 = F1.F * O1 * O3.transpose();
  out.A2 = F2.F * O2 * O3.transpose();

  BlockDiagnostics& dg = out.diagnostics;
  dg.l = l;
  dg.sdp_objective = sol.objective;
  dg.feasibility_residual = sol.feasibility_residual;
  dg.rank_proxy = rnd.rank_proxy;
  dg.sdp_iterations = sol.iterations;
  dg.warnings = rnd.warnings;
  if (rnd.rank_proxy > kRankProxyWarn)
    dg.warnings.push_back("SDP solution has rank above " + std::to_string(prob.d) +
                          " (rank proxy " + std::to_string(rnd.rank_proxy) +
                          "); the data may not determine this degree");
  const double resid = (out.A2 - out.A1 - D).norm();
  const double dn = D.norm();
  if (dn > 0.0) {
    dg.difference_residual = resid / dn;
  } else {
    dg.difference_residual = resid;
    dg.difference_residual_is_absolute = true;
  }
  return out;
}

struct ReplacementResult {
  CoefficientSet A1;
  CoefficientSet A2;
  std::vector<BlockDiagnostics> diagnostics;  // one per solved degree
  std::vector<int> skipped;                   // degrees above the gate
};

/// Degree-by-degree replacement. Degrees above K/2 are zero-filled and
/// listed in `skipped`.
inline ReplacementResult or_retrieve(const std::vector<Autocorrelation>& C1,
                                     const std::vector<Autocorrelation>& C2,
                                     const CoefficientSet& delta,
                                     const SdpOptions& opts = {}) {
  delta.validate();
  const int L = delta.L;
  const int K = delta.K();
  if (static_cast<int>(C1.size()) != L + 1 || static_cast<int>(C2.size()) != L + 1)
    throw GridMismatchError("or_retrieve: autocorrelation count does not match band limit " +
                            std::to_string(L));
  for (int l = 0; l <= L; ++l)
    if (C1[l].C.rows() != K || C2[l].C.rows() != K || C1[l].l != l || C2[l].l != l)
      throw GridMismatchError("or_retrieve: C_" + std::to_string(l) +
                              " does not match the difference grid");

  ReplacementResult r{CoefficientSet::zeros(delta.grid, L),
                      CoefficientSet::zeros(delta.grid, L), {}, {}};
  for (int l = 0; l <= L; ++l) {
    if (!resolution_gate(K, l).pass) {
      r.skipped.push_back(l);
      continue;
    }
    const Factor f1 = factor_autocorrelation(C1[l]);
    const Factor f2 = factor_autocorrelation(C2[l]);
    BlockRetrieval b = or_retrieve_block(f1, f2, delta.blocks[l], opts);
    r.A1.blocks[l] = std::move(b.A1);
    r.A2.blocks[l] = std::move(b.A2);
    r.diagnostics.push_back(std::move(b.diagnostics));
  }
  return r;
}

}  // namespace kamor
