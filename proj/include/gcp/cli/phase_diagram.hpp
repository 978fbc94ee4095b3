#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gcp/analytic_lyapunov.hpp"
#include "gcp/errors.hpp"
#include "gcp/parallel.hpp"

namespace gcp::cli {

struct GridSpec {
  int N = 3;
  double alpha_min = 0.1;
  double alpha_max = 100.0;
  int alpha_count = 61;
  double beta_min = 0.0;
  double beta_max = 0.95;
  int beta_count = 20;
};

struct PhaseCell {
  double alpha;
  double beta;
  double lambda1 = std::numeric_limits<double>::quiet_NaN();
  std::string regime;  // "error" when evaluation failed
  std::string error;
};

struct CriticalPoint {
  double beta;
  double alpha_cr = std::numeric_limits<double>::quiet_NaN();
  double rho_cr = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct PhaseDiagramGrid {
  int N = 0;
  std::vector<double> alpha_values;
  std::vector<double> beta_values;
  std::vector<PhaseCell> cells;  // beta-major: cell (a, b) at b * |alpha| + a
  std::vector<CriticalPoint> critical_curve;
};

// Log-spaced; a single point sits at alpha_min.
inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  }
  v.front() = lo;
  if (n > 1) v.back() = hi;
  return v;
}

inline std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  if (n > 1) v.back() = hi;
  return v;
}

inline PhaseDiagramGrid run_phase_diagram(const GridSpec& g, double tol = 1e-9) {
  if (g.N < 2) throw UsageError("phase diagram: N must be >= 2");
  if (g.alpha_count < 1 || g.beta_count < 1) throw UsageError("phase diagram: empty grid");
  if (!(g.alpha_min > 0.0) || g.alpha_max < g.alpha_min) {
    throw UsageError("phase diagram: need 0 < alpha-min <= alpha-max");
  }
  if (g.beta_min < 0.0 || g.beta_max >= 1.0 || g.beta_max < g.beta_min) {
    throw UsageError("phase diagram: need 0 <= beta-min <= beta-max < 1");
  }
  PhaseDiagramGrid out;
  out.N = g.N;
  out.alpha_values = log_grid(g.alpha_min, g.alpha_max, g.alpha_count);
  out.beta_values = linear_grid(g.beta_min, g.beta_max, g.beta_count);
  const std::size_t na = out.alpha_values.size(), nb = out.beta_values.size();
  out.cells.resize(na * nb);
  out.critical_curve.resize(nb);
  parallel_for(na * nb + nb, [&](std::size_t idx) {
    if (idx < na * nb) {
      PhaseCell& c = out.cells[idx];
      c.alpha = out.alpha_values[idx % na];
      c.beta = out.beta_values[idx / na];
      try {
        const Regime r = classify_regime(ModelParams(g.N, 1, c.alpha, c.beta), tol);
        c.lambda1 = r.lambda1;
        c.regime = to_string(r.tag);
      } catch (const Error& e) {
        c.regime = "error";
        c.error = e.what();
      }
      return;
    }
    CriticalPoint& cp = out.critical_curve[idx - na * nb];
    cp.beta = out.beta_values[idx - na * nb];
    try {
      cp.alpha_cr = critical_alpha(cp.beta, g.N);
      cp.rho_cr = cp.alpha_cr * (1.0 - cp.beta) * (1.0 - cp.beta);
    } catch (const Error& e) {
      cp.error = e.what();
    }
  });
  return out;
}

}  // namespace gcp::cli
