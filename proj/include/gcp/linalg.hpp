#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gcp/errors.hpp"

namespace gcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct QrFactors {
  Matrix Q;  // rows x cols, orthonormal columns
  Matrix R;  // cols x cols, upper triangular with R_ii >= 0
};

// Thin Householder QR with signs fixed so the diagonal of R is non-negative.
inline QrFactors qr_positive(const Matrix& A) {
  const Eigen::Index n = A.rows(), k = A.cols();
  Eigen::HouseholderQR<Matrix> qr(A);
  QrFactors f;
  f.Q = qr.householderQ() * Matrix::Identity(n, k);
  f.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (f.R(i, i) < 0.0) {
      f.R.row(i) *= -1.0;
      f.Q.col(i) *= -1.0;
    }
  }
  return f;
}

namespace detail {

inline Matrix psd_sqrt_impl(const Matrix& C, bool clamp_material, bool* clamped) {
  if (C.rows() != C.cols()) throw DomainError("psd_sqrt: matrix must be square");
  const Matrix S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigensolver failed");
  const double scale = std::max(std::abs(S.trace()), S.cwiseAbs().maxCoeff());
  Vector ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-12 * scale) {
      if (!clamp_material) throw DomainError("psd_sqrt: matrix is indefinite");
      if (clamped) *clamped = true;
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// Symmetric square root of a positive semi-definite matrix. Eigenvalues
// within 1e-12 * trace below zero are rounding and clamped to 0; anything
// more negative is a domain error.
inline Matrix psd_sqrt(const Matrix& C) { return detail::psd_sqrt_impl(C, false, nullptr); }

// As psd_sqrt, but every negative eigenvalue is clamped; *clamped reports
// whether one was materially negative.
inline Matrix psd_sqrt_clamped(const Matrix& C, bool* clamped = nullptr) {
  return detail::psd_sqrt_impl(C, true, clamped);
}

// |A| = (A^T A)^{1/2}.
inline Matrix matrix_abs(const Matrix& A) { return psd_sqrt_clamped(A.transpose() * A); }

// Rows of the (N-1) x N Helmert matrix: row k has k entries 1/sqrt(k(k+1)),
// then -k/sqrt(k(k+1)), then zeros. V V^T = I and V 1 = 0.
struct ProjectionMatrix {
  Matrix V;
};

inline ProjectionMatrix build_projection(int N) {
  if (N < 2) throw DomainError("build_projection: N must be >= 2");
  Matrix V = Matrix::Zero(N - 1, N);
  for (int k = 1; k < N; ++k) {
    const double c = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    V.row(k - 1).head(k).setConstant(c);
    V(k - 1, k) = -k * c;
  }
  return {V};
}

struct LogSvd {
  Vector log_sigma;     // descending
  Matrix right_vectors; // column i pairs with log_sigma(i)
};

// Log singular values of a square matrix by one-sided Jacobi on its
// transpose, in long double. For the triangular factors accumulated by QR
// flows the rows are graded, and orthogonalising rows keeps the small
// singular values to high relative accuracy where a normal-equations or
// two-sided approach would lose them below machine epsilon.
inline LogSvd log_singular_values(const Matrix& R) {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = R.rows();
  if (R.cols() != n) throw DomainError("log_singular_values: matrix must be square");
  LMatrix B = R.transpose().cast<long double>();
  constexpr long double eps = 1e-19L;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const long double a = B.col(p).squaredNorm();
        const long double b = B.col(q).squaredNorm();
        const long double g = B.col(p).dot(B.col(q));
        if (g == 0.0L || std::abs(g) <= eps * std::sqrt(a * b)) continue;
        rotated = true;
        const long double zeta = (b - a) / (2.0L * g);
        const long double t = (zeta >= 0 ? 1.0L : -1.0L) /
                              (std::abs(zeta) + std::hypot(1.0L, zeta));
        const long double c = 1.0L / std::hypot(1.0L, t), s = c * t;
        const auto bp = B.col(p).eval();
        B.col(p) = c * bp - s * B.col(q);
        B.col(q) = s * bp + c * B.col(q);
      }
    }
    if (!rotated) break;
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<long double> norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms[i] = B.col(i).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](auto i, auto j) { return norms[i] > norms[j]; });
  LogSvd out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = order[k];
    out.log_sigma(k) = static_cast<double>(std::log(norms[i]));
    out.right_vectors.col(k) =
        norms[i] > 0 ? (B.col(i) / norms[i]).cast<double>().eval() : Vector::Zero(n).eval();
  }
  return out;
}

}  // namespace gcp
