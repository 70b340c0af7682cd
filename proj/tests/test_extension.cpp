#include <gtest/gtest.h>

#include <random>

#include "kamor/extension.hpp"
#include "test_support.hpp"

namespace {

using namespace kamor;
using test_util::gaussian_matrix;
using test_util::orthogonality_defect;
using test_util::random_orthogonal;

Factor factor_of(const Matrix& A, int l) {
  return factor_autocorrelation({l, A * A.transpose()});
}

TEST(Procrustes, SelfAlignmentIsIdentityAction) {
  std::mt19937_64 rng(1);
  const Matrix F = gaussian_matrix(7, 5, rng);
  const OrthogonalMatrix o = procrustes({2, F}, F);
  EXPECT_LT((o.O - Matrix::Identity(5, 5)).norm(), 1e-12);
  EXPECT_LT((F * o.O - F).norm(), 1e-12);
  EXPECT_FALSE(o.degenerate);
}

TEST(Procrustes, RecoversKnownRotation) {
  std::mt19937_64 rng(2);
  const Matrix F = gaussian_matrix(9, 5, rng);
  const Matrix R = random_orthogonal(5, rng);
  const OrthogonalMatrix o = procrustes({2, F}, F * R);
  EXPECT_LT((o.O - R).norm(), 1e-10);
}

TEST(Procrustes, BeatsRandomOrthogonalSearch) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix F = gaussian_matrix(8, 5, rng);
    const Matrix B = gaussian_matrix(8, 5, rng);
    const OrthogonalMatrix o = procrustes({2, F}, B);
    EXPECT_LT(orthogonality_defect(o.O), 1e-12);
    const double best = (F * o.O - B).norm();
    for (int i = 0; i < 1000; ++i) {
      const double other = (F * random_orthogonal(5, rng) - B).norm();
      ASSERT_LE(best, other + 1e-10);
    }
  }
}

TEST(Procrustes, ZeroHomologIsDegenerate) {
  std::mt19937_64 rng(4);
  const Matrix F = gaussian_matrix(5, 3, rng);
  const OrthogonalMatrix o = procrustes({1, F}, Matrix::Zero(5, 3));
  EXPECT_TRUE(o.degenerate);
  EXPECT_LT(orthogonality_defect(o.O), 1e-12);
}

TEST(Procrustes, RejectsShapeMismatch) {
  EXPECT_THROW(procrustes({1, Matrix::Zero(5, 3)}, Matrix::Zero(4, 3)), DimensionError);
  EXPECT_THROW(procrustes({2, Matrix::Zero(5, 3)}, Matrix::Zero(5, 3)), DimensionError);
}

TEST(OeEstimate, ExactWhenHomologIsTruth) {
  std::mt19937_64 rng(5);
  for (int l = 0; l <= 5; ++l) {
    const Matrix A = gaussian_matrix(14, block_width(l), rng);
    const Factor F = factor_of(A, l);
    EXPECT_LT((oe_estimate(F, A) - A).norm(), 1e-10 * A.norm()) << "l=" << l;
    EXPECT_LT((oe_estimate_weighted(F, A) - A).norm(), 1e-10 * A.norm()) << "l=" << l;
  }
}

TEST(OeEstimate, ZeroHomologPreservesNorm) {
  std::mt19937_64 rng(6);
  const Matrix A = gaussian_matrix(6, 3, rng);
  const Factor F = factor_of(A, 1);
  EXPECT_NEAR(oe_estimate(F, Matrix::Zero(6, 3)).norm(), A.norm(), 1e-10 * A.norm());
}

TEST(OeEstimate, PreservesAutocorrelation) {
  std::mt19937_64 rng(7);
  const Matrix A = gaussian_matrix(10, 7, rng);
  const Factor F = factor_of(A, 3);
  const Matrix B = gaussian_matrix(10, 7, rng);
  const Matrix est = oe_estimate(F, B);
  EXPECT_LT((est * est.transpose() - A * A.transpose()).norm(), 1e-10 * (A * A.transpose()).norm());
}

TEST(OeEstimate, GaugeInvariance) {
  std::mt19937_64 rng(8);
  const Matrix A = gaussian_matrix(12, 7, rng);
  const Matrix B = A + 0.3 * gaussian_matrix(12, 7, rng);
  const Factor F = factor_of(A, 3);
  const Matrix R = random_orthogonal(7, rng);
  const Factor FR{3, F.F * R};
  EXPECT_LT((oe_estimate(FR, B) - oe_estimate(F, B)).norm(), 1e-10 * A.norm());
}

TEST(OeEstimate, WeightedHalvesFirstOrderError) {
  // with B exact and F perturbed by t E, the plain error is ~t and the
  // weighted one ~2t: the weighted variant doubles the factor-side error
  std::mt19937_64 rng(9);
  const int l = 3, K = 20, d = block_width(l);
  const Matrix A = gaussian_matrix(K, d, rng);
  const Matrix E = gaussian_matrix(K, d, rng);
  const double t = 1e-4 * A.norm() / E.norm();
  const Factor F{l, A + t * E};
  const double plain = (oe_estimate(F, A) - A).norm();
  const double weighted = (oe_estimate_weighted(F, A) - A).norm();
  EXPECT_GT(weighted / plain, 1.5);
  EXPECT_LT(weighted / plain, 2.5);
}

TEST(OrthogonalExtension, ExactRecoveryFullSet) {
  std::mt19937_64 rng(10);
  const int K = 20, L = 8;
  CoefficientSet truth = CoefficientSet::zeros(RadialGrid::uniform(0.1, 3.0, K), L);
  for (int l = 0; l <= L; ++l) truth.blocks[l] = gaussian_matrix(K, block_width(l), rng);
  const ExtensionResult r = orthogonal_extension(autocorrelation(truth), truth);
  EXPECT_TRUE(r.degenerate_degrees.empty());
  for (int l = 0; l <= L; ++l)
    EXPECT_LT((r.estimate.blocks[l] - truth.blocks[l]).norm(), 1e-8 * truth.blocks[l].norm());
}

TEST(OrthogonalExtension, FlagsZeroHomologDegrees) {
  std::mt19937_64 rng(11);
  CoefficientSet truth = CoefficientSet::zeros(RadialGrid::uniform(0.1, 3.0, 6), 2);
  for (int l = 0; l <= 2; ++l) truth.blocks[l] = gaussian_matrix(6, block_width(l), rng);
  CoefficientSet homolog = truth;
  homolog.blocks[1].setZero();
  const ExtensionResult r = orthogonal_extension(autocorrelation(truth), homolog);
  EXPECT_EQ(r.degenerate_degrees, std::vector<int>{1});
}

TEST(OrthogonalExtension, RejectsMismatchedGrid) {
  std::mt19937_64 rng(12);
  CoefficientSet truth = CoefficientSet::zeros(RadialGrid::uniform(0.1, 3.0, 6), 2);
  CoefficientSet other = CoefficientSet::zeros(RadialGrid::uniform(0.1, 3.0, 5), 2);
  EXPECT_THROW(orthogonal_extension(autocorrelation(truth), other), GridMismatchError);
  CoefficientSet shorter = CoefficientSet::zeros(RadialGrid::uniform(0.1, 3.0, 6), 1);
  EXPECT_THROW(orthogonal_extension(autocorrelation(truth), shorter), GridMismatchError);
}

}  // namespace
