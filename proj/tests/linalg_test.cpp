#include <gtest/gtest.h>

#include <cmath>

#include "gcp/linalg.hpp"
#include "gcp/random_matrix_mc.hpp"

namespace {

using gcp::Matrix;

TEST(Projection, HelmertInvariants) {
  const Matrix V2 = gcp::build_projection(2).V;
  EXPECT_NEAR(V2(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(V2(0, 1), -1.0 / std::sqrt(2.0), 1e-15);
  for (int N = 2; N <= 12; ++N) {
    const Matrix V = gcp::build_projection(N).V;
    ASSERT_EQ(V.rows(), N - 1);
    ASSERT_EQ(V.cols(), N);
    EXPECT_LT((V * V.transpose() - Matrix::Identity(N - 1, N - 1)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((V * Matrix::Ones(N, 1)).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix P = V.transpose() * V;
    const Matrix expected = Matrix::Identity(N, N) - Matrix::Constant(N, N, 1.0 / N);
    EXPECT_LT((P - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(gcp::build_projection(1), gcp::DomainError);
}

TEST(Qr, PositiveDiagonalAndReconstruction) {
  gcp::RngStream rng(1, 0);
  const Matrix A = gcp::sample_gaussian_matrix(7, 3, rng);
  const auto f = gcp::qr_positive(A);
  EXPECT_LT((f.Q * f.R - A).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((f.Q.transpose() * f.Q - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  for (int i = 0; i < 3; ++i) EXPECT_GT(f.R(i, i), 0.0);
  EXPECT_EQ(f.R(2, 0), 0.0);
}

TEST(PsdSqrt, SquaresBackAndRejectsIndefinite) {
  gcp::RngStream rng(2, 0);
  const Matrix B = gcp::sample_gaussian_matrix(4, 4, rng);
  const Matrix C = B * B.transpose();
  const Matrix S = gcp::psd_sqrt(C);
  EXPECT_LT((S * S - C).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  Matrix bad = Matrix::Identity(3, 3);
  bad(2, 2) = -0.5;
  EXPECT_THROW(gcp::psd_sqrt(bad), gcp::DomainError);
  bool clamped = false;
  const Matrix fixed = gcp::psd_sqrt_clamped(bad, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_EQ(fixed(2, 2), 0.0);
  Matrix tiny = Matrix::Identity(2, 2);
  tiny(1, 1) = -1e-14;  // rounding-level, not an error
  EXPECT_NO_THROW(gcp::psd_sqrt(tiny));
}

TEST(MatrixAbs, MatchesSvd) {
  gcp::RngStream rng(3, 0);
  const Matrix A = gcp::sample_gaussian_matrix(5, 3, rng);
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinV);
  const Matrix ref = svd.matrixV() * svd.singularValues().asDiagonal() * svd.matrixV().transpose();
  EXPECT_LT((gcp::matrix_abs(A) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LogSingularValues, GradedTriangular) {
  Matrix R(2, 2);
  R << 1.0, 0.5, 0.0, 1e-60;
  const auto sv = gcp::log_singular_values(R);
  EXPECT_NEAR(sv.log_sigma(0), 0.5 * std::log(1.25), 1e-15);
  EXPECT_NEAR(sv.log_sigma(1), std::log(1e-60) - 0.5 * std::log(1.25), 1e-12);
  // Right singular vector for the top value is (1, 0.5)/|.|, up to sign.
  EXPECT_NEAR(std::abs(sv.right_vectors(1, 0) / sv.right_vectors(0, 0)), 0.5, 1e-14);
}

TEST(LogSingularValues, MatchesEigenSvdOnGenericMatrices) {
  gcp::RngStream rng(4, 0);
  for (int n : {1, 2, 4, 6}) {
    const Matrix A = gcp::sample_gaussian_matrix(n, n, rng);
    const auto sv = gcp::log_singular_values(A);
    Eigen::JacobiSVD<Matrix> ref(A);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(sv.log_sigma(i), std::log(ref.singularValues()(i)), 1e-12);
      if (i > 0) EXPECT_GE(sv.log_sigma(i - 1), sv.log_sigma(i));
    }
    // A v = sigma u for the reported right vectors.
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR((A * sv.right_vectors.col(i)).norm(), std::exp(sv.log_sigma(i)), 1e-12);
    }
  }
}

TEST(LogSingularValues, RankDeficient) {
  Matrix R = Matrix::Zero(2, 2);
  R(0, 0) = 2.0;
  R(0, 1) = 1.0;
  const auto sv = gcp::log_singular_values(R);
  EXPECT_TRUE(std::isinf(sv.log_sigma(1)));
  EXPECT_NEAR(sv.log_sigma(0), 0.5 * std::log(5.0), 1e-15);
}

}  // namespace
