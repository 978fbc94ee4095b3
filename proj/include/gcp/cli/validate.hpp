#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gcp/analytic_lyapunov.hpp"
#include "gcp/errors.hpp"
#include "gcp/model_a.hpp"
#include "gcp/model_b.hpp"
#include "gcp/random_matrix_mc.hpp"
#include "gcp/special_functions.hpp"

namespace gcp::cli {

enum class Level { Quick, Full };

// Deliberate defects for mutation-testing the suite.
enum class Fault {
  None,
  FlipBetaSign,  // sqrt(rho/N) G - beta I: same law up to sign, so undetectable
  NoiseScale,    // Ginibre part scaled by 1.5
};

struct FaultySampler {
  Fault fault = Fault::None;
  Matrix operator()(const ModelParams& p, RngStream& rng) const {
    const int n = p.N - 1;
    double scale = std::sqrt(p.rho() / p.N);
    double shift = p.beta;
    if (fault == Fault::FlipBetaSign) shift = -shift;
    if (fault == Fault::NoiseScale) scale *= 1.5;
    Matrix M = scale * sample_gaussian_matrix(n, n, rng);
    M.diagonal().array() += shift;
    return M;
  }
};

struct InvariantResult {
  std::string module;
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double expected = 0.0;
  double se = 0.0;  // 0 for deterministic checks
  std::string detail;
};

struct ValidationContext {
  Level level;
  std::uint64_t seed;
  Fault fault;
  bool full() const { return level == Level::Full; }
};

struct Invariant {
  std::string module;
  std::string name;
  bool full_only;
  std::function<InvariantResult(const ValidationContext&, RngStream&)> run;
};

namespace detail {

inline double phi_tight(double m, double x) { return phi_series(m, x, 1e-17).value; }

// x phi'' + (x + m) phi' - 1 by finite differences of a tightly summed series.
inline double phi_ode_residual(double m, double x) {
  if (x == 0.0) {
    const double h = 1e-5;
    const double d1 = (-3.0 * phi_tight(m, 0.0) + 4.0 * phi_tight(m, h) - phi_tight(m, 2 * h)) / (2 * h);
    return m * d1 - 1.0;
  }
  const double h = 1e-2 * std::min(1.0, x);
  const double f2p = phi_tight(m, x + 2 * h), f1p = phi_tight(m, x + h), f0 = phi_tight(m, x);
  const double f1m = phi_tight(m, x - h), f2m = phi_tight(m, x - 2 * h);
  const double d1 = (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h);
  const double d2 = (-f2p + 16 * f1p - 30 * f0 + 16 * f1m - f2m) / (12 * h * h);
  return x * d2 + (x + m) * d1 - 1.0;
}

inline InvariantResult result(bool passed, double observed, double expected, double se,
                              std::string detail = {}) {
  return {{}, {}, passed, observed, expected, se, std::move(detail)};
}

inline Matrix fixed_start(int N, int d, std::uint64_t seed) {
  RngStream r(seed, 0xA11CE);
  return sample_gaussian_matrix(N, d, r);
}

}  // namespace detail

inline const std::vector<double>& phi_grid_x() {
  static const std::vector<double> xs = {0.0, 0.1, 1.0, 5.0, 20.0, 50.0};
  return xs;
}

// Largest disagreement among the phi paths on the standard grid; ClosedOdd
// is defined only for integer m and x > 0.
inline double phi_path_disagreement() {
  double worst = 0.0;
  for (int twice_m = 1; twice_m <= 12; ++twice_m) {
    const double m = 0.5 * twice_m;
    for (double x : phi_grid_x()) {
      const double s = phi(m, x, PhiEvalPath::Series);
      worst = std::max(worst, std::abs(s - phi(m, x, PhiEvalPath::Integral)));
      if (twice_m % 2 == 0 && x > 0.0) {
        worst = std::max(worst, std::abs(s - phi(m, x, PhiEvalPath::ClosedOdd)));
      }
    }
  }
  return worst;
}

inline double phi_ode_worst_residual() {
  double worst = 0.0;
  for (int twice_m = 1; twice_m <= 12; ++twice_m) {
    for (double x : phi_grid_x()) {
      worst = std::max(worst, std::abs(detail::phi_ode_residual(0.5 * twice_m, x)));
    }
  }
  return worst;
}

inline std::vector<Invariant> build_invariants() {
  std::vector<Invariant> v;
  const auto add = [&](std::string module, std::string name, bool full_only, auto fn) {
    v.push_back({std::move(module), std::move(name), full_only, std::move(fn)});
  };
  using Ctx = const ValidationContext&;

  add("special_functions", "phi_path_agreement", false, [](Ctx, RngStream&) {
    const double w = phi_path_disagreement();
    return detail::result(w < 1e-9, w, 0.0, 0.0, "max |difference| across paths, tol 1e-9");
  });
  add("special_functions", "phi_ode_residual", false, [](Ctx, RngStream&) {
    const double w = phi_ode_worst_residual();
    return detail::result(w < 1e-7, w, 0.0, 0.0, "max |x phi'' + (x+m) phi' - 1|, tol 1e-7");
  });
  add("analytic_lyapunov", "critical_alpha_beta0_closed_form", false, [](Ctx, RngStream&) {
    double worst = 0.0;
    for (int N = 3; N <= 12; ++N) {
      worst = std::max(worst, std::abs(critical_alpha_bisect(0.0, N) - critical_alpha_beta0(N)));
    }
    return detail::result(worst < 1e-8, worst, 0.0, 0.0, "N = 3..12, tol 1e-8");
  });
  add("analytic_lyapunov", "rho_critical_decreasing_in_beta", false, [](Ctx, RngStream&) {
    double worst_step = -INFINITY;  // largest rho_cr(b + 0.1) - rho_cr(b)
    for (int N : {3, 5, 9}) {
      double prev = rho_critical(0.0, N);
      for (int i = 1; i <= 9; ++i) {
        const double cur = rho_critical(0.1 * i, N);
        worst_step = std::max(worst_step, cur - prev);
        prev = cur;
      }
    }
    return detail::result(worst_step < 0.0, worst_step, 0.0, 0.0, "max increment must be < 0");
  });
  add("analytic_lyapunov", "lambda1_series_vs_integral", false, [](Ctx, RngStream&) {
    double worst = 0.0;
    for (int N : {4, 6, 10}) {
      for (double beta : {0.2, 0.6, 0.9}) {
        const ModelParams p(N, 1, 1.7, beta);
        worst = std::max(worst, std::abs(lambda1_via(p, PhiEvalPath::Series) -
                                         lambda1_via(p, PhiEvalPath::Integral)));
      }
    }
    return detail::result(worst < 1e-9, worst, 0.0, 0.0, "tol 1e-9");
  });
  add("random_matrix_mc", "qr_spectrum_beta0_closed_form", false, [](Ctx c, RngStream& rng) {
    const ModelParams p(5, 1, 1.0, 0.0);
    const auto est = estimate_spectrum_qr(p, c.full() ? 200000 : 20000, rng, FaultySampler{c.fault});
    double worst_z = 0.0, obs = 0.0, expv = 0.0, se = 0.0;
    bool ok = true;
    for (int k = 1; k <= 4; ++k) {
      const double target = lambda_k_beta0(1.0, 5, k);
      const double diff = std::abs(est.exponents[k - 1] - target);
      const double allowed = std::max(4.0 * est.std_errors[k - 1], 0.02);
      ok = ok && diff <= allowed;
      const double z = diff / allowed;
      if (z >= worst_z) {
        worst_z = z;
        obs = est.exponents[k - 1];
        expv = target;
        se = est.std_errors[k - 1];
      }
    }
    return detail::result(ok, obs, expv, se, "worst k, allowed max(4 SE, 0.02)");
  });
  add("random_matrix_mc", "qr_top_exponent_vs_lambda1", false, [](Ctx c, RngStream& rng) {
    const ModelParams p(5, 1, 1.0, 0.5);
    const auto est = estimate_spectrum_qr(p, c.full() ? 200000 : 20000, rng, FaultySampler{c.fault});
    const double target = lambda1(p);
    const double diff = std::abs(est.exponents[0] - target);
    return detail::result(diff <= std::max(4.0 * est.std_errors[0], 0.02), est.exponents[0], target,
                          est.std_errors[0], "beta = 0.5, allowed max(4 SE, 0.02)");
  });
  add("model_a", "cov_conditional_mean", false, [](Ctx c, RngStream& rng) {
    const ModelParams p(4, 2, 1.0, 0.3);
    const OpinionState s(detail::fixed_start(4, 2, c.seed));
    const auto rep = cov_conditional_moment_check(s, p, c.full() ? 100000 : 10000, rng);
    const double z = rep.mean_z.cwiseAbs().maxCoeff();
    return detail::result(z < 4.0, z, 0.0, 1.0, "max |z|, factor (N-1) rho / N + beta^2");
  });
  add("model_a", "cov_conditional_variance", false, [](Ctx c, RngStream& rng) {
    const ModelParams p(4, 2, 1.0, 0.3);
    const OpinionState s(detail::fixed_start(4, 2, c.seed));
    const auto rep = cov_conditional_moment_check(s, p, c.full() ? 100000 : 10000, rng);
    const double z = rep.variance_z_beta_sq.cwiseAbs().maxCoeff();
    return detail::result(z < 4.0, z, 0.0, 1.0,
                          "max |z|, factor rho^2 (N-1)/N^2 + 2 beta^2 rho / N");
  });
  add("model_a", "log_variance_walk_drift", false, [](Ctx c, RngStream& rng) {
    const ModelParams p(5, 1, 1.0, 0.0);
    const auto rec = run_trajectory(p, detail::fixed_start(5, 1, c.seed), c.full() ? 100000 : 20000, rng);
    const auto rep = logvar_random_walk_check(rec, p);
    return detail::result(std::abs(rep.z) < 4.0, rep.mean_increment, rep.expected, rep.se,
                          "mean increment of log Cov_11 vs 2 lambda1");
  });
  add("model_b", "cov_drift", false, [](Ctx c, RngStream& rng) {
    const ModelBParams p(4, 2, 0.2, 1e-3);
    const DiffusionState s(detail::fixed_start(4, 2, c.seed));
    const auto rep = cov_drift_check(s, p, c.full() ? 100000 : 10000, rng);
    const double z = rep.z.cwiseAbs().maxCoeff();
    return detail::result(z < 4.0, z, 0.0, 1.0, "max |z|, drift (N - 1 - 2 gamma N)/N Cov");
  });
  add("model_b", "classify_boundary", false, [](Ctx, RngStream&) {
    int wrong = 0;
    for (int N = 2; N <= 50; ++N) {
      const double gc = 0.5 - 1.5 / N;
      wrong += classify_model_b(gc, N, 0.0).tag != RegimeTag::Critical;
      wrong += classify_model_b(std::nextafter(gc, 1.0), N, 0.0).tag != RegimeTag::Subcritical;
      wrong += classify_model_b(std::nextafter(gc, -1.0), N, 0.0).tag != RegimeTag::Supercritical;
    }
    return detail::result(wrong == 0, wrong, 0.0, 0.0, "misclassified points");
  });
  add("model_b", "matrix_abs_lipschitz", false, [](Ctx c, RngStream& rng) {
    const int pairs = c.full() ? 1000 : 200;
    double worst = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const int m = 1 + static_cast<int>(rng.uniform() * 6);
      const int n = 1 + static_cast<int>(rng.uniform() * 6);
      const Matrix A = sample_gaussian_matrix(m, n, rng);
      const Matrix B = A + std::pow(10.0, -6.0 * rng.uniform()) * sample_gaussian_matrix(m, n, rng);
      worst = std::max(worst, (matrix_abs(A) - matrix_abs(B)).norm() / (A - B).norm());
    }
    return detail::result(worst <= std::sqrt(2.0), worst, std::sqrt(2.0), 0.0,
                          "max ||A|-|B||_F / ||A-B||_F");
  });
  add("model_b", "gl_exponents", true, [](Ctx, RngStream& rng) {
    const auto est = estimate_gl_exponents(4, 30.0, 1e-3, 100, rng);
    const double targets[4] = {3.0, 1.0, -1.0, -3.0};
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(est.mean(i) / targets[i] - 1.0));
    return detail::result(worst < 0.15, worst, 0.0, 0.0, "max relative error vs {3, 1, -1, -3}");
  });
  add("model_b", "em_vs_exact", true, [](Ctx c, RngStream& rng) {
    const ModelBParams p(4, 2, 0.3, 1e-3);
    const Matrix Z0 = detail::fixed_start(4, 2, c.seed);
    const auto a = mean_se(tr_cov_samples(Scheme::EulerMaruyama, Z0, p, 1.0, 4000, rng));
    const auto b = mean_se(tr_cov_samples(Scheme::Exact, Z0, p, 1.0, 4000, rng));
    const double se = std::hypot(a.se, b.se);
    return detail::result(std::abs(a.mean - b.mean) < 3.0 * se, a.mean, b.mean, se,
                          "mean tr Cov(1), EM vs exact");
  });
  return v;
}

struct ValidationReport {
  std::vector<InvariantResult> results;
  int registered = 0;
  int failed = 0;
  bool ok() const { return failed == 0; }
};

inline ValidationReport run_validate(Level level, std::uint64_t seed, Fault fault = Fault::None) {
  const auto invariants = build_invariants();
  const ValidationContext ctx{level, seed, fault};
  ValidationReport rep;
  for (std::size_t i = 0; i < invariants.size(); ++i) {
    const Invariant& inv = invariants[i];
    if (inv.full_only && level == Level::Quick) continue;
    ++rep.registered;
    RngStream rng(seed, i);
    InvariantResult r;
    try {
      r = inv.run(ctx, rng);
    } catch (const Error& e) {
      r = {{}, {}, false, NAN, NAN, NAN, std::string("error: ") + e.what()};
    }
    r.module = inv.module;
    r.name = inv.name;
    rep.failed += !r.passed;
    rep.results.push_back(std::move(r));
  }
  return rep;
}

}  // namespace gcp::cli
