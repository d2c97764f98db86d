#include <gtest/gtest.h>

#include "fairpls/error.hpp"
#include "fairpls/metrics.hpp"
#include "fairpls/pls.hpp"
#include "test_util.hpp"

using namespace fairpls;
using fairpls::tu::random_instance;

namespace {

Vector dense_leading(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  return es.eigenvectors().col(M.rows() - 1);
}

}  // namespace

TEST(Nipals, FirstWeightIsLeadingEigenvector) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = random_instance(60, 7, 2, seed);
    PlsModel m = nipals_fit(in.X, in.Y, 1);
    const Matrix& X = in.X.values();
    const Matrix& Y = in.Y.values();
    Vector v = dense_leading(X.transpose() * Y * Y.transpose() * X);
    EXPECT_LE(tu::signed_col_err(m.W.col(0), v), 1e-6) << "seed " << seed;
  }
}

TEST(Nipals, OrthonormalColumnsTargetIsColumn) {
  std::mt19937_64 rng(4);
  Matrix A = tu::randn(40, 4, rng);
  A.rowwise() -= A.colwise().mean();
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ() * Matrix::Identity(40, 4);
  CenteredMatrix X = CenteredMatrix::fit(Q);
  CenteredMatrix Y = CenteredMatrix::fit(Matrix(X.values().col(2)));
  PlsModel m = nipals_fit(X, Y, 1);
  EXPECT_LE(tu::signed_col_err(m.T.col(0), X.values().col(2)), 1e-8);
}

TEST(Nipals, FullRankReconstructsExactly) {
  auto in = random_instance(30, 5, 1, 9);
  PlsModel m = nipals_fit(in.X, in.Y, 5);
  EXPECT_NEAR(reconstruction_error(in.X, m), 0.0, 1e-8);
}

TEST(Nipals, RankOneResidualMatchesDirectComputation) {
  std::mt19937_64 rng(2);
  Matrix X = tu::randn(25, 2, rng) * tu::randn(2, 4, rng);
  CenteredMatrix Xc = CenteredMatrix::fit(X);
  CenteredMatrix Yc = CenteredMatrix::fit(tu::randn(25, 1, rng));
  PlsModel m = nipals_fit(Xc, Yc, 1);
  const Matrix& Xv = Xc.values();
  Vector w = Xv.transpose() * Yc.values().col(0);
  w.normalize();
  Vector t = Xv * w;
  Vector p = Xv.transpose() * t / t.squaredNorm();
  const double direct = (Xv - t * p.transpose()).squaredNorm() / Xv.squaredNorm();
  EXPECT_NEAR(reconstruction_error(Xc, m), direct, 1e-12);
}

TEST(Nipals, InvariantsOverRandomSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const Index n = tu::uniform_int(rng, 10, 100), d = tu::uniform_int(rng, 2, 20);
    const int k = static_cast<int>(std::min<Index>({3, n, d}));
    auto in = random_instance(n, d, 1, seed);
    PlsModel m = nipals_fit(in.X, in.Y, k);
    ASSERT_EQ(m.k(), k);
    const double tscale = m.T.colwise().squaredNorm().maxCoeff();
    for (int h = 0; h < k; ++h) {
      EXPECT_NEAR(m.W.col(h).norm(), 1.0, 1e-12);
      EXPECT_GT(canonical_sign(m.W.col(h)), 0.0);
      for (int g = 0; g < h; ++g) EXPECT_LE(std::abs(m.T.col(h).dot(m.T.col(g))), 1e-8 * tscale);
    }
    // Single target: |t_{h+1}'y| = |t_h'y| sqrt(|p_h|^2 - 1), so the covariances are
    // ordered exactly when |p_h|^2 <= 2; seed 4 breaks unconditional ordering.
    const Vector y = in.Y.values().col(0);
    for (int h = 1; h < k; ++h) {
      const double prev = std::abs(m.T.col(h - 1).dot(y)), cur = std::abs(m.T.col(h).dot(y));
      const double p2 = m.P.col(h - 1).squaredNorm();
      EXPECT_GE(p2, 1.0 - 1e-10);
      EXPECT_NEAR(cur, prev * std::sqrt(std::max(p2 - 1.0, 0.0)), 1e-8 * prev) << "seed " << seed;
      if (p2 <= 2.0) {
        EXPECT_GE(prev * (1 + 1e-9), cur) << "seed " << seed;
      }
    }
  }
}

TEST(Nipals, TransformReproducesTrainingScores) {
  auto in = random_instance(50, 6, 2, 3);
  PlsModel m = nipals_fit(in.X, in.Y, 3);
  EXPECT_LE(tu::rel_err(transform(m, in.X), m.T), 1e-12);
  Matrix zeros = Matrix::Zero(1, 6);
  EXPECT_EQ(transform(m, zeros), Matrix::Zero(1, 3));
  Matrix dup(2, 6);
  dup.row(0) = in.X.values().row(5);
  dup.row(1) = in.X.values().row(5);
  Matrix t = transform(m, dup);
  EXPECT_EQ(t.row(0), t.row(1));
  EXPECT_THROW(transform(m, Matrix::Zero(1, 5)), Error);
}

TEST(Nipals, ReconstructZeroScores) {
  auto in = random_instance(20, 4, 1, 8);
  PlsModel m = nipals_fit(in.X, in.Y, 2);
  EXPECT_EQ(reconstruct(m, Matrix::Zero(3, 2)), Matrix::Zero(3, 4));
}

TEST(Nipals, Preconditions) {
  auto in = random_instance(20, 4, 1, 8);
  EXPECT_THROW(nipals_fit(in.X, in.Y, 0), Error);
  EXPECT_THROW(nipals_fit(in.X, in.Y, 5), Error);
  CenteredMatrix raw;
  EXPECT_THROW(nipals_fit(raw, in.Y, 1), Error);
}

TEST(PowerIteration, Diagonal) {
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = 3;
  M(1, 1) = 1;
  EigenPair e = power_iteration(M);
  EXPECT_NEAR(e.value, 3.0, 1e-12);
  EXPECT_NEAR(std::abs(e.vector(0)), 1.0, 1e-10);
  EXPECT_TRUE(e.converged);
}

TEST(PowerIteration, Identity) {
  EigenPair e = power_iteration(Matrix::Identity(4, 4));
  EXPECT_NEAR(e.value, 1.0, 1e-12);
  EXPECT_NEAR(e.vector.norm(), 1.0, 1e-12);
  EXPECT_LE(e.residual, 1e-10);
}

TEST(PowerIteration, MatchesDenseSolver) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix A = tu::randn(5, 5, rng);
    Matrix M = A * A.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    EigenPair e = power_iteration(M);
    EXPECT_LE(std::abs(e.value - es.eigenvalues()(4)) / es.eigenvalues()(4), 1e-6);
    EXPECT_LE(tu::signed_col_err(e.vector, es.eigenvectors().col(4)), 1e-6) << "seed " << seed;
  }
}
