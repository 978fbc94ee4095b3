#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "gcp/random_matrix_mc.hpp"

namespace {

using gcp::Matrix;
using gcp::ModelParams;
using gcp::RngStream;

TEST(Rng, DeterministicAndStreamSeparated) {
  RngStream a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    if (i == 0) {
      EXPECT_NE(x, c.normal());
      EXPECT_NE(x, d.normal());
    }
  }
}

TEST(Rng, NormalMoments) {
  RngStream r(7, 3);
  const int n = 400000;
  std::vector<double> xs(n), sq(n), qu(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = r.normal();
    sq[i] = xs[i] * xs[i];
    qu[i] = sq[i] * sq[i];
  }
  const auto m1 = gcp::mean_se(xs), m2 = gcp::mean_se(sq), m4 = gcp::mean_se(qu);
  EXPECT_LT(std::abs(m1.mean) / m1.se, 4.0);
  EXPECT_LT(std::abs(m2.mean - 1.0) / m2.se, 4.0);
  EXPECT_LT(std::abs(m4.mean - 3.0) / m4.se, 4.0);
  RngStream u(7, 4);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(GaussianMatrix, MomentsAndOrthogonalInvariance) {
  RngStream rng(11, 0);
  const int n = 5, reps = 20000;
  const Matrix O = gcp::qr_positive(gcp::sample_gaussian_matrix(n, n, rng)).Q;
  std::vector<double> raw, conj, raw_sq, conj_sq;
  for (int r = 0; r < reps; ++r) {
    const Matrix G = gcp::sample_gaussian_matrix(n, n, rng);
    const Matrix H = O * G * O.transpose();
    raw.push_back(G(1, 2));
    conj.push_back(H(1, 2));
    raw_sq.push_back(G(3, 3) * G(3, 3));
    conj_sq.push_back(H(3, 3) * H(3, 3));
  }
  for (const auto* v : {&raw, &conj}) {
    const auto m = gcp::mean_se(*v);
    EXPECT_LT(std::abs(m.mean) / m.se, 4.0);
  }
  for (const auto* v : {&raw_sq, &conj_sq}) {
    const auto m = gcp::mean_se(*v);
    EXPECT_LT(std::abs(m.mean - 1.0) / m.se, 4.0);
  }
}

TEST(SampleM, EntryMoments) {
  const ModelParams p(6, 1, 1.7, 0.35);
  RngStream rng(5, 0);
  std::vector<double> diag, off;
  for (int r = 0; r < 40000; ++r) {
    const Matrix M = gcp::sample_M(p, rng);
    ASSERT_EQ(M.rows(), 5);
    diag.push_back(M(2, 2));
    off.push_back(M(0, 4));
  }
  const auto md = gcp::mean_se(diag), mo = gcp::mean_se(off);
  EXPECT_LT(std::abs(md.mean - p.beta) / md.se, 4.0);
  EXPECT_LT(std::abs(mo.mean) / mo.se, 4.0);
  EXPECT_LT(std::abs(mo.variance - p.rho() / p.N) / mo.variance_se, 4.0);
  EXPECT_LT(std::abs(md.variance - p.rho() / p.N) / md.variance_se, 4.0);
}

TEST(SpectrumQr, BetaZeroMatchesClosedForm) {
  const ModelParams p(5, 1, 1.0, 0.0);
  RngStream rng(2024, 0);
  const auto est = gcp::estimate_spectrum_qr(p, 200000, rng);
  ASSERT_EQ(est.exponents.size(), 4u);
  for (int k = 1; k <= 4; ++k) {
    const double tol = std::max(3.0 * est.std_errors[k - 1], 0.01);
    EXPECT_NEAR(est.exponents[k - 1], gcp::lambda_k_beta0(1.0, 5, k), tol) << k;
    EXPECT_GT(est.std_errors[k - 1], 0.0);
    if (k > 1) EXPECT_GT(est.exponents[k - 2], est.exponents[k - 1]);
  }
}

TEST(SpectrumQr, SumMatchesLogDeterminant) {
  const ModelParams p(4, 1, 1.3, 0.4);
  RngStream rng(9, 0), det_rng(9, 1);
  const auto est = gcp::estimate_spectrum_qr(p, 50000, rng);
  const double sum = std::accumulate(est.exponents.begin(), est.exponents.end(), 0.0);
  std::vector<double> logdet;
  for (int i = 0; i < 50000; ++i) {
    logdet.push_back(std::log(std::abs(gcp::sample_M(p, det_rng).determinant())));
  }
  const auto md = gcp::mean_se(logdet);
  // The exponent sum is itself a mean of log|det M| over the same number of
  // draws, so both carry the per-draw standard error.
  EXPECT_LT(std::abs(sum - md.mean), 3.0 * std::sqrt(2.0) * md.se);
}

TEST(SpectrumQr, BetaZeroSumIsLogDeterminantForThreeAgents) {
  RngStream rng(31, 0);
  const ModelParams p(3, 1, 1.0, 0.0);
  std::vector<double> logdet;
  for (int i = 0; i < 200000; ++i) {
    logdet.push_back(std::log(std::abs(gcp::sample_M(p, rng).determinant())));
  }
  const auto md = gcp::mean_se(logdet);
  const double analytic = gcp::lambda_k_beta0(1.0, 3, 1) + gcp::lambda_k_beta0(1.0, 3, 2);
  EXPECT_LT(std::abs(md.mean - analytic), 3.0 * md.se);
}

TEST(SpectrumQr, TwoAgentsMatchesQuadrature) {
  const ModelParams p(2, 1, 1.0, 0.5);
  const double s = std::sqrt(p.rho() / 2.0), x0 = -p.beta / s;
  boost::math::quadrature::exp_sinh<double> integrator;
  auto dens = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); };
  const double inf = std::numeric_limits<double>::infinity();
  const double ref =
      integrator.integrate([&](double u) { return std::log(s * u) * dens(x0 + u); }, 0.0, inf) +
      integrator.integrate([&](double u) { return std::log(s * u) * dens(x0 - u); }, 0.0, inf);
  RngStream rng(77, 0);
  const auto est = gcp::estimate_spectrum_qr(p, 400000, rng);
  EXPECT_LT(std::abs(est.exponents[0] - ref), 3.0 * est.std_errors[0]);
}

TEST(SpectrumQr, Errors) {
  const ModelParams p(3, 1, 1.0, 0.0);
  RngStream rng(1, 0);
  EXPECT_THROW(gcp::estimate_spectrum_qr(p, 99, rng), gcp::UsageError);
  auto zero = [](const ModelParams& q, RngStream&) { return Matrix::Zero(q.N - 1, q.N - 1).eval(); };
  try {
    gcp::estimate_spectrum_qr(p, 100, rng, zero);
    FAIL() << "expected NumericalError";
  } catch (const gcp::NumericalError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(Wk, FirstIsOneAndRange) {
  const ModelParams p(6, 1, 1.0, 0.3);
  RngStream rng(3, 0);
  EXPECT_EQ(gcp::sample_Wk(p, 1, rng).value, 1.0);
  for (int k = 2; k <= 5; ++k) {
    const auto w = gcp::sample_Wk(p, k, rng);
    EXPECT_EQ(w.k, k);
    EXPECT_GE(w.value, 0.0);
    EXPECT_LE(w.value, 1.0 + 1e-15);
  }
  EXPECT_THROW(gcp::sample_Wk(p, 0, rng), gcp::UsageError);
  EXPECT_THROW(gcp::sample_Wk(p, 6, rng), gcp::UsageError);
}

TEST(Wk, SecondMatchesExplicitLaw) {
  const ModelParams p(5, 1, 1.0, 0.6);
  const double c2 = p.rho() / p.N, c = std::sqrt(c2);
  RngStream rng(8, 0), ref_rng(8, 1);
  const int n = 20000;
  std::vector<double> sampled, explicit_law;
  for (int i = 0; i < n; ++i) {
    sampled.push_back(gcp::sample_Wk(p, 2, rng).value);
    const double x1 = ref_rng.normal(), x2 = ref_rng.normal();
    double rest = x2 * x2;
    for (int j = 3; j <= p.N - 1; ++j) {
      const double x = ref_rng.normal();
      rest += x * x;
    }
    const double head = p.beta + c * x1;
    explicit_law.push_back(std::sqrt(1.0 - c2 * x2 * x2 / (head * head + c2 * rest)));
  }
  EXPECT_GT(gcp::ks_two_sample(sampled, explicit_law).p_value, 1e-3);
}

TEST(Wk, StochasticallyDecreasingInK) {
  const ModelParams p(6, 1, 1.0, 0.5);
  RngStream rng(12, 0);
  const int n = 20000;
  std::vector<std::vector<double>> w(6);
  for (int k = 2; k <= 5; ++k) {
    for (int i = 0; i < n; ++i) w[k].push_back(gcp::sample_Wk(p, k, rng).value);
  }
  for (int k = 2; k < 5; ++k) {
    for (double x = 0.05; x < 1.0; x += 0.05) {
      auto cdf = [&](const std::vector<double>& v) {
        return std::count_if(v.begin(), v.end(), [x](double y) { return y <= x; }) / double(n);
      };
      const double fk = cdf(w[k]), fk1 = cdf(w[k + 1]);
      const double se = std::sqrt((fk * (1 - fk) + fk1 * (1 - fk1)) / n);
      EXPECT_LE(fk, fk1 + 4.0 * se + 1e-12) << k << " " << x;
    }
  }
}

TEST(LambdaFormula, MatchesClosedFormAtBetaZero) {
  const ModelParams p(5, 1, 1.0, 0.0);
  RngStream rng(21, 0);
  for (int k = 1; k <= 4; ++k) {
    const auto e = gcp::estimate_lambda_k_formula(p, k, 100000, rng);
    EXPECT_LT(std::abs(e.value - gcp::lambda_k_beta0(1.0, 5, k)), 4.0 * e.se) << k;
  }
  EXPECT_THROW(gcp::estimate_lambda_k_formula(p, 1, 999, rng), gcp::UsageError);
}

TEST(LambdaFormula, MatchesQrFlowWithInertia) {
  const ModelParams p(5, 1, 1.5, 0.5);
  RngStream rng(22, 0), qr_rng(22, 1);
  const auto qr = gcp::estimate_spectrum_qr(p, 200000, qr_rng);
  const auto e1 = gcp::estimate_lambda_k_formula(p, 1, 100000, rng);
  EXPECT_LT(std::abs(e1.value - gcp::lambda1(p)), 4.0 * e1.se);
  for (int k = 2; k <= 4; ++k) {
    const auto e = gcp::estimate_lambda_k_formula(p, k, 100000, rng);
    const double se = std::hypot(e.se, qr.std_errors[k - 1]);
    EXPECT_LT(std::abs(e.value - qr.exponents[k - 1]), 4.0 * se) << k;
  }
}

TEST(NoncentralChiSquare, IdentityWithTopExponent) {
  for (int N : {2, 3, 6, 11}) {
    for (double b : {0.0, 0.3, 0.8}) {
      const ModelParams p(N, 1, 1.2, b);
      const double via = 0.5 * (std::log(p.rho() / N) +
                                gcp::log_noncentral_chisq_mean(N - 1, N * b * b / p.rho()));
      EXPECT_NEAR(via, gcp::lambda1(p), 1e-12);
    }
  }
}

TEST(NoncentralChiSquare, MonteCarlo) {
  RngStream rng(4, 0);
  const double nu = 3, kappa = 2.5;
  std::vector<double> logs;
  for (int i = 0; i < 200000; ++i) {
    const double a = rng.normal() + std::sqrt(kappa), b = rng.normal(), c = rng.normal();
    logs.push_back(std::log(a * a + b * b + c * c));
  }
  const auto m = gcp::mean_se(logs);
  EXPECT_LT(std::abs(m.mean - gcp::log_noncentral_chisq_mean(nu, kappa)), 4.0 * m.se);
  EXPECT_THROW(gcp::log_noncentral_chisq_mean(0.0, 1.0), gcp::DomainError);
  EXPECT_THROW(gcp::log_noncentral_chisq_mean(1.0, -1.0), gcp::DomainError);
}

TEST(ProjectiveContraction, SlopeIsSpectralGap) {
  const ModelParams p(10, 1, 1.0, 0.0);
  RngStream rng(99, 0);
  const auto pc = gcp::track_projective_contraction(p, 10000, rng);
  ASSERT_FALSE(pc.truncated);
  ASSERT_EQ(pc.log_sin.size(), 10000u);
  std::vector<double> t(pc.log_sin.size());
  std::iota(t.begin(), t.end(), 1.0);
  const double slope = gcp::fit_line(t, pc.log_sin).slope;
  const double gap = gcp::lambda_k_beta0(1.0, 10, 1) - gcp::lambda_k_beta0(1.0, 10, 2);
  EXPECT_NEAR(slope, -gap, 0.2 * gap);
}

}  // namespace
