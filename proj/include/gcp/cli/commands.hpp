#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcp/analytic_lyapunov.hpp"
#include "gcp/cli/config.hpp"
#include "gcp/cli/emit.hpp"
#include "gcp/cli/phase_diagram.hpp"
#include "gcp/cli/validate.hpp"
#include "gcp/errors.hpp"
#include "gcp/model_a.hpp"
#include "gcp/model_b.hpp"
#include "gcp/random_matrix_mc.hpp"

namespace gcp::cli {

enum ExitCode { kOk = 0, kValidationFailed = 1, kUsage = 2, kNumerical = 3 };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline Json json_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

// Stream layout: 0 drives the dynamics, 1 draws the initial state.
inline Matrix initial_state(int N, int d, std::uint64_t seed) {
  RngStream r(seed, 1);
  return sample_gaussian_matrix(N, d, r);
}

inline int default_d(const ExperimentConfig& c, int N) {
  return static_cast<int>(c.get_int("d", std::min(2, N - 1)));
}

inline ModelParams model_params(const ExperimentConfig& c, int default_topics) {
  const int N = static_cast<int>(c.get_int("N"));
  return ModelParams(N, static_cast<int>(c.get_int("d", default_topics)), c.get_real("alpha"),
                     c.get_real("beta"));
}

inline Document run_analytic(const ExperimentConfig& c) {
  const ModelParams p = model_params(c, 1);
  const double tol = c.get_real("tol", 1e-9);
  const Regime r = classify_regime(p, tol);
  const double ac = critical_alpha(p.beta, p.N);
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"N", "alpha", "beta", "rho", "lambda1", "regime", "alpha_cr", "rho_cr"};
  doc.table.rows.push_back({static_cast<long long>(p.N), p.alpha, p.beta, p.rho(), r.lambda1,
                            std::string(to_string(r.tag)), ac, ac * (1 - p.beta) * (1 - p.beta)});
  Json& s = doc.summary;
  s["lambda1_large_N"] = lambda1_large_N(p.alpha, p.beta);
  s["gap12_large_N"] = p.N >= 3 ? json_or_null(gap12_large_N(p)) : Json(nullptr);
  Json bounds = Json::array();
  for (int k = 1; k <= p.N - 2; ++k) bounds.push_back(gap_lower_bound(p, k));
  s["gap_lower_bounds"] = bounds;
  if (p.beta == 0.0) {
    Json closed = Json::array();
    for (int k = 1; k <= p.N - 1; ++k) closed.push_back(lambda_k_beta0(p.alpha, p.N, k));
    s["lambda_k_closed_form"] = closed;
  }
  s["model_b_critical_gamma"] = model_b_critical_gamma(p.N);
  return doc;
}

inline Document run_phase_diagram_command(const ExperimentConfig& c) {
  GridSpec g;
  g.N = static_cast<int>(c.get_int("N"));
  g.alpha_min = c.get_real("alpha-min", g.alpha_min);
  g.alpha_max = c.get_real("alpha-max", g.alpha_max);
  if (c.has("alpha-count")) g.alpha_count = checked_int(c, "alpha-count", 1, 100000);
  g.beta_min = c.get_real("beta-min", g.beta_min);
  g.beta_max = c.get_real("beta-max", g.beta_max);
  if (c.has("beta-count")) g.beta_count = checked_int(c, "beta-count", 1, 100000);
  const PhaseDiagramGrid grid = run_phase_diagram(g, c.get_real("tol", 1e-9));
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"alpha", "beta", "N", "lambda1", "regime"};
  Json errors = Json::array();
  for (const auto& cell : grid.cells) {
    doc.table.rows.push_back({cell.alpha, cell.beta, static_cast<long long>(grid.N), cell.lambda1, cell.regime});
    if (!cell.error.empty()) errors.push_back({{"alpha", cell.alpha}, {"beta", cell.beta}, {"error", cell.error}});
  }
  Json curve = Json::array();
  for (const auto& cp : grid.critical_curve) {
    Json e = {{"beta", cp.beta}, {"alpha_cr", json_or_null(cp.alpha_cr)}, {"rho_cr", json_or_null(cp.rho_cr)}};
    if (!cp.error.empty()) e["error"] = cp.error;
    curve.push_back(std::move(e));
  }
  doc.summary["critical_curve"] = std::move(curve);
  doc.summary["cell_errors"] = std::move(errors);
  return doc;
}

inline Document run_mc_spectrum(const ExperimentConfig& c) {
  const ModelParams p = model_params(c, 1);
  RngStream rng(c.seed(), 0);
  const auto est = estimate_spectrum_qr(p, c.get_int("steps"), rng);
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"k", "lambda_hat", "se", "steps"};
  for (int k = 1; k <= p.N - 1; ++k) {
    doc.table.rows.push_back({static_cast<long long>(k), est.exponents[k - 1], est.std_errors[k - 1],
                              static_cast<long long>(est.steps)});
  }
  doc.summary["lambda1_analytic"] = lambda1(p);
  if (p.beta == 0.0) {
    Json closed = Json::array();
    for (int k = 1; k <= p.N - 1; ++k) closed.push_back(lambda_k_beta0(p.alpha, p.N, k));
    doc.summary["lambda_k_closed_form"] = closed;
  }
  return doc;
}

inline StepMethod step_method(const ExperimentConfig& c) {
  return c.get_text("method", "matrix") == "direct" ? StepMethod::Direct : StepMethod::Matrix;
}

inline Document run_simulate_a(const ExperimentConfig& c) {
  const int N = static_cast<int>(c.get_int("N"));
  const ModelParams p = model_params(c, default_d(c, N));
  RngStream rng(c.seed(), 0);
  const auto rec = run_trajectory(p, initial_state(p.N, p.d, c.seed()), c.get_int("steps"), rng,
                                  c.get_int("stride", 1), step_method(c));
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"t", "diameter", "log_var_1", "eig_ratio", "corr_12"};
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const double ratio = p.d >= 2 ? std::exp(rec.log_cov_eigenvalues[i](1) - rec.log_cov_eigenvalues[i](0)) : kNaN;
    const double corr = p.d >= 2 ? rec.topic_correlations[i](0, 1) : kNaN;
    doc.table.rows.push_back({static_cast<long long>(rec.times[i]), std::exp(rec.log_diameters[i]),
                              rec.log_var_topic[i](0), ratio, corr});
  }
  doc.summary["lambda1"] = lambda1(p);
  doc.summary["regime"] = to_string(classify_regime(p).tag);
  doc.summary["truncated"] = rec.truncated;
  return doc;
}

inline Document run_simulate_b(const ExperimentConfig& c) {
  const int N = static_cast<int>(c.get_int("N"));
  const ModelBParams p(N, default_d(c, N), c.get_real("gamma"), c.get_real("dt", 1e-3));
  RngStream rng(c.seed(), 0);
  const Matrix Z0 = initial_state(p.N, p.d, c.seed());
  const long stride = c.get_int("stride", 1);
  const double t_end = c.get_real("t-end");
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"t", "tr_cov", "log_tr_cov"};
  bool clamped = false;
  if (c.get_text("scheme", "em") == "exact") {
    const auto tr = exact_trajectory(Z0, p, t_end, rng, stride);
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
      doc.table.rows.push_back({tr.states[i].t, std::exp(tr.log_tr_cov[i]), tr.log_tr_cov[i]});
    }
  } else {
    const auto tr = em_trajectory(Z0, p, t_end, rng, stride);
    clamped = tr.clamped;
    for (const auto& s : tr.states) {
      const double v = s.tr_cov();
      doc.table.rows.push_back({s.t, v, std::log(v)});
    }
  }
  const Regime r = classify_model_b(p.gamma, p.N);
  doc.summary["growth_rate"] = r.lambda1;
  doc.summary["regime"] = to_string(r.tag);
  doc.summary["critical_gamma"] = model_b_critical_gamma(p.N);
  doc.summary["psd_clamped"] = clamped;
  return doc;
}

inline Document run_align(const ExperimentConfig& c) {
  const int N = static_cast<int>(c.get_int("N"));
  const ModelParams p = model_params(c, default_d(c, N));
  if (p.d < 2) throw UsageError("align needs d >= 2");
  const long steps = c.get_int("steps");
  RngStream rng(c.seed(), 0);
  const auto rec = run_trajectory(p, initial_state(p.N, p.d, c.seed()), steps, rng, c.get_int("stride", 1));
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"t", "log_eig_ratio", "abs_corr_12"};
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const double lr = rec.log_cov_eigenvalues[i](1) - rec.log_cov_eigenvalues[i](0);
    doc.table.rows.push_back({static_cast<long long>(rec.times[i]), lr, std::abs(rec.topic_correlations[i](0, 1))});
    if (rec.times[i] >= steps / 10) {
      ts.push_back(static_cast<double>(rec.times[i]));
      ys.push_back(lr);
    }
  }
  Json& s = doc.summary;
  s["fitted_slope"] = ts.size() >= 3 ? json_or_null(fit_line(ts, ys).slope) : Json(nullptr);
  s["expected_slope"] = p.beta == 0.0
                            ? Json(-2.0 * (lambda_k_beta0(p.alpha, p.N, 1) - lambda_k_beta0(p.alpha, p.N, 2)))
                            : Json(nullptr);
  s["truncated"] = rec.truncated;
  const long replicas = c.get_int("replicas", 1);
  if (replicas >= 2) {
    RngStream srng(c.seed(), 2);
    const auto sph = sphere_limit_check(p, steps, static_cast<int>(replicas), srng);
    s["sphere"] = {{"replicas", sph.replicas},
                   {"mean_sq", sph.mean_sq},
                   {"z_sq", sph.z_sq},
                   {"expected_sq", 1.0 / p.N},
                   {"max_abs_coordinate_sum", sph.max_abs_coordinate_sum},
                   {"fourth_moment", sph.fourth_moment},
                   {"fourth_expected", sph.fourth_expected},
                   {"fourth_se", sph.fourth_se},
                   {"inconclusive", sph.inconclusive}};
  }
  return doc;
}

inline Document validation_document(const ExperimentConfig& c, const ValidationReport& rep) {
  Document doc{c.command(), c.echo(), {}, Json::object()};
  doc.table.header = {"module", "invariant", "status", "observed", "expected", "se"};
  for (const auto& r : rep.results) {
    doc.table.rows.push_back({r.module, r.name, std::string(r.passed ? "pass" : "fail"), r.observed, r.expected, r.se});
  }
  Json details = Json::array();
  for (const auto& r : rep.results) details.push_back({{"invariant", r.name}, {"detail", r.detail}});
  doc.summary["registered"] = rep.registered;
  doc.summary["failed"] = rep.failed;
  doc.summary["details"] = std::move(details);
  return doc;
}

struct ParsedArgs {
  std::optional<std::string> command;
  std::optional<std::string> config_path;
  std::map<std::string, Json> flags;
  bool help = false;
  std::string help_text;
};

inline ParsedArgs parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Gaussian consensus processes: analytic exponents, simulators and checks", "gcp_cli"};
  std::string command;
  app.add_option("command", command,
                 "analytic | phase-diagram | mc-spectrum | simulate-a | simulate-b | align | validate");
  std::string config_path;
  app.add_option("--config", config_path, "JSON config document; flags override its keys");
  std::map<std::string, std::string> raw;
  for (const auto& k : key_table()) {
    std::string help = k.help;
    if (!k.choices.empty()) {
      help += " {";
      for (std::size_t i = 0; i < k.choices.size(); ++i) help += (i ? "|" : "") + k.choices[i];
      help += "}";
    }
    app.add_option("--" + k.name, raw[k.name], help);
  }
  ParsedArgs out;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out.help = true;
    out.help_text = app.help();
    return out;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  if (app.count("command")) out.command = command;
  if (app.count("--config")) out.config_path = config_path;
  for (const auto& k : key_table()) {
    if (app.count("--" + k.name)) out.flags[k.name] = parse_flag_value(k, raw[k.name]);
  }
  return out;
}

// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               Fault fault = Fault::None) {
  try {
    const ParsedArgs pa = parse_args(args);
    if (pa.help) {
      out << pa.help_text;
      return kOk;
    }
    const Json file = pa.config_path ? read_config_file(*pa.config_path) : Json();
    const ExperimentConfig cfg = merge_config(pa.command, file, pa.flags);
    const std::string& cmd = cfg.command();
    if (cmd == "validate") {
      const Level level = cfg.get_text("level", "quick") == "full" ? Level::Full : Level::Quick;
      const ValidationReport rep = run_validate(level, cfg.seed(), fault);
      emit(validation_document(cfg, rep), cfg.format(), cfg.out(), out);
      err << "validate: " << rep.registered - rep.failed << " of " << rep.registered << " invariants passed\n";
      for (const auto& r : rep.results) {
        if (!r.passed) {
          err << "  FAIL " << r.module << "/" << r.name << ": observed " << format_double(r.observed)
              << ", expected " << format_double(r.expected) << ", se " << format_double(r.se) << " ("
              << r.detail << ")\n";
        }
      }
      return rep.ok() ? kOk : kValidationFailed;
    }
    Document doc;
    if (cmd == "analytic") doc = run_analytic(cfg);
    else if (cmd == "phase-diagram") doc = run_phase_diagram_command(cfg);
    else if (cmd == "mc-spectrum") doc = run_mc_spectrum(cfg);
    else if (cmd == "simulate-a") doc = run_simulate_a(cfg);
    else if (cmd == "simulate-b") doc = run_simulate_b(cfg);
    else if (cmd == "align") doc = run_align(cfg);
    else throw UsageError("unknown command '" + cmd + "'");
    emit(doc, cfg.format(), cfg.out(), out);
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what();
    if (e.step() >= 0) err << " (step " << e.step() << ")";
    if (e.achieved_tolerance() != 0.0) err << " (achieved " << format_double(e.achieved_tolerance()) << ")";
    err << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace gcp::cli
