#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gcp/cli/commands.hpp"

namespace {

namespace fs = std::filesystem;
using gcp::cli::Fault;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(const std::vector<std::string>& args, Fault fault = Fault::None) {
  std::ostringstream out, err;
  const int code = gcp::cli::run(args, out, err, fault);
  return {code, out.str(), err.str()};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gcp_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(ParseConfig, MinimalAnalytic) {
  const auto r = run({"analytic", "--N", "5", "--alpha", "1", "--beta", "0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(first_line(r.out), "N,alpha,beta,rho,lambda1,regime,alpha_cr,rho_cr");
  EXPECT_NE(r.out.find("subcritical"), std::string::npos);
}

TEST(ParseConfig, RejectsInvalidInput) {
  const std::vector<std::vector<std::string>> bad = {
      {"analytic", "--N", "5", "--alpha", "1", "--beta", "1.0"},
      {"analytic", "--N", "3", "--d", "3", "--alpha", "1", "--beta", "0"},
      {"analytic", "--N", "5", "--alpha", "1"},
      {"analytic", "--N", "five", "--alpha", "1", "--beta", "0"},
      {"analytic", "--N", "5", "--alpha", "-1", "--beta", "0"},
      {"analytic", "--N", "5", "--alpha", "1", "--beta", "0", "--gamma", "0.1"},
      {"mc-spectrum", "--N", "5", "--alpha", "1", "--beta", "0", "--steps", "1000"},
      {"simulate-b", "--N", "4", "--gamma", "0.1", "--t-end", "1", "--seed", "1", "--scheme", "rk4"},
      {"frobnicate", "--N", "5"},
      {"--N", "5"},
      {"analytic", "--N", "5", "--alpha", "1", "--beta", "0", "--bogus", "1"},
  };
  for (const auto& args : bad) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2) << args[0] << " " << r.err;
    EXPECT_FALSE(r.err.empty());
  }
  EXPECT_NE(run(bad[0]).err.find("beta"), std::string::npos);
  EXPECT_NE(run(bad[6]).err.find("seed"), std::string::npos);
}

TEST(ParseConfig, ConfigFileWithOverrides) {
  const auto cfg = temp_path("cfg.json");
  std::ofstream(cfg) << R"({"command": "analytic", "N": 5, "alpha": 1.0, "beta": 0.5})";
  const auto from_file = run({"--config", cfg.string()});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_NE(from_file.out.find("\n5,1,0.5,"), std::string::npos);
  const auto overridden = run({"--config", cfg.string(), "--beta", "0.25"});
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_NE(overridden.out.find("\n5,1,0.25,"), std::string::npos);

  std::ofstream(cfg) << R"({"command": "analytic", "N": 5, "alpha": 1.0, "beta": 0.5, "colour": 3})";
  const auto unknown = run({"--config", cfg.string()});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("colour"), std::string::npos);

  std::ofstream(cfg) << R"({"command": "analytic", "N": "5", "alpha": 1.0, "beta": 0.5})";
  EXPECT_EQ(run({"--config", cfg.string()}).code, 2);
  std::ofstream(cfg) << R"({"command": "analytic", "N": 5, )";
  EXPECT_EQ(run({"--config", cfg.string()}).code, 2);
  EXPECT_EQ(run({"--config", (temp_path("missing") / "x.json").string()}).code, 2);
}

TEST(Emit, CsvHeadersAreExact) {
  const auto header = [](const std::vector<std::string>& args) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return first_line(r.out);
  };
  EXPECT_EQ(header({"phase-diagram", "--N", "3", "--alpha-count", "3", "--beta-count", "2"}),
            "alpha,beta,N,lambda1,regime");
  EXPECT_EQ(header({"mc-spectrum", "--N", "4", "--alpha", "1", "--beta", "0", "--steps", "200", "--seed", "1"}),
            "k,lambda_hat,se,steps");
  EXPECT_EQ(header({"simulate-a", "--N", "4", "--alpha", "1", "--beta", "0.2", "--steps", "20", "--seed", "1"}),
            "t,diameter,log_var_1,eig_ratio,corr_12");
  EXPECT_EQ(header({"simulate-b", "--N", "4", "--gamma", "0.1", "--t-end", "0.1", "--seed", "1"}),
            "t,tr_cov,log_tr_cov");
}

TEST(Emit, SeventeenSignificantDigits) {
  EXPECT_EQ(gcp::cli::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(gcp::cli::format_double(1.0), "1");
  EXPECT_EQ(gcp::cli::format_double(NAN), "nan");
  EXPECT_EQ(gcp::cli::format_double(-INFINITY), "-inf");
}

TEST(Emit, JsonRoundTrip) {
  const auto r = run({"mc-spectrum", "--N", "5", "--alpha", "1.3", "--beta", "0.2", "--steps", "500",
                      "--seed", "9", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["command"], "mc-spectrum");
  EXPECT_EQ(doc["config"]["alpha"].get<double>(), 1.3);
  EXPECT_EQ(doc["config"]["seed"].get<std::uint64_t>(), 9u);
  const auto csv = run({"mc-spectrum", "--N", "5", "--alpha", "1.3", "--beta", "0.2", "--steps", "500",
                        "--seed", "9"});
  std::istringstream lines(csv.out);
  std::string line;
  std::getline(lines, line);
  for (const auto& rec : doc["records"]) {
    std::getline(lines, line);
    // Both forms carry the same doubles bit for bit.
    const double from_csv = std::strtod(line.substr(line.find(',') + 1).c_str(), nullptr);
    EXPECT_EQ(rec["lambda_hat"].get<double>(), from_csv);
  }
  EXPECT_EQ(doc["records"].size(), 4u);
  // Rendering the parsed document again reproduces it.
  EXPECT_EQ(doc.dump(2) + "\n", r.out);
}

TEST(Determinism, ByteIdenticalRepeatsAcrossThreadCounts) {
  const std::vector<std::vector<std::string>> commands = {
      {"analytic", "--N", "7", "--alpha", "2", "--beta", "0.3"},
      {"phase-diagram", "--N", "4", "--alpha-count", "6", "--beta-count", "3"},
      {"mc-spectrum", "--N", "4", "--alpha", "1", "--beta", "0.1", "--steps", "2000", "--seed", "5"},
      {"simulate-a", "--N", "5", "--alpha", "2", "--beta", "0.1", "--steps", "300", "--seed", "5"},
      {"simulate-b", "--N", "4", "--gamma", "0.1", "--t-end", "0.5", "--seed", "5", "--scheme", "exact"},
      {"simulate-b", "--N", "4", "--gamma", "0.1", "--t-end", "0.5", "--seed", "5"},
      {"align", "--N", "5", "--alpha", "1", "--beta", "0", "--steps", "300", "--seed", "5", "--replicas", "8"},
      {"validate", "--seed", "5"},
  };
  int idx = 0;
  for (auto args : commands) {
    for (const char* fmt : {"csv", "json"}) {
      std::string outputs[2];
      for (int rep = 0; rep < 2; ++rep) {
        setenv("GCP_THREADS", rep == 0 ? "1" : "3", 1);
        const auto path = temp_path("det_" + std::to_string(idx) + "_" + std::to_string(rep));
        auto a = args;
        a.insert(a.end(), {"--out", path.string(), "--format", fmt});
        const auto r = run(a);
        EXPECT_EQ(r.code, 0) << args[0] << " " << r.err;
        EXPECT_TRUE(r.out.empty());
        outputs[rep] = slurp(path);
      }
      EXPECT_FALSE(outputs[0].empty());
      EXPECT_EQ(outputs[0], outputs[1]) << args[0] << " " << fmt;
      ++idx;
    }
  }
  unsetenv("GCP_THREADS");
}

TEST(Emit, UnwritablePathIsReported) {
  const auto r = run({"analytic", "--N", "5", "--alpha", "1", "--beta", "0", "--out",
                      (temp_path("nope") / "missing_dir" / "x.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing_dir"), std::string::npos);
}

TEST(PhaseDiagram, BoundaryAtClosedFormForThreeAgents) {
  gcp::cli::GridSpec g;
  g.N = 3;
  g.alpha_min = 0.5;
  g.alpha_max = 20.0;
  g.alpha_count = 80;
  g.beta_min = 0.0;
  g.beta_max = 0.9;
  g.beta_count = 10;
  const auto grid = gcp::cli::run_phase_diagram(g);
  ASSERT_EQ(grid.cells.size(), 800u);
  const double ac = 1.5 * std::exp(gcp::kEulerGamma);
  EXPECT_NEAR(ac, 2.6717, 1e-4);
  EXPECT_NEAR(grid.critical_curve[0].alpha_cr, ac, 1e-8);
  for (std::size_t b = 0; b < grid.beta_values.size(); ++b) {
    int transitions = 0;
    for (std::size_t a = 0; a + 1 < grid.alpha_values.size(); ++a) {
      const auto& lo = grid.cells[b * 80 + a];
      const auto& hi = grid.cells[b * 80 + a + 1];
      EXPECT_TRUE(lo.error.empty());
      transitions += lo.regime != hi.regime;
      if (lo.regime == "subcritical" && hi.regime == "supercritical" && b == 0) {
        EXPECT_LT(lo.alpha, ac);
        EXPECT_GT(hi.alpha, ac);
      }
    }
    EXPECT_LE(transitions, 1) << b;
    if (grid.critical_curve[b].alpha_cr < g.alpha_max) EXPECT_EQ(transitions, 1) << b;
  }
  for (const auto& c : grid.cells) {
    EXPECT_EQ(c.regime == "supercritical", c.lambda1 > 1e-9);
  }
}

TEST(PhaseDiagram, RhoCriticalDecreasesDownColumnsForNine) {
  gcp::cli::GridSpec g;
  g.N = 9;
  g.alpha_count = 2;
  g.beta_count = 19;
  const auto grid = gcp::cli::run_phase_diagram(g);
  for (std::size_t b = 1; b < grid.critical_curve.size(); ++b) {
    EXPECT_LT(grid.critical_curve[b].rho_cr, grid.critical_curve[b - 1].rho_cr);
  }
}

TEST(Validate, QuickPassesAndCountsInvariants) {
  const auto r = run({"validate", "--seed", "11"});
  EXPECT_EQ(r.code, 0) << r.err;
  std::size_t quick = 0;
  for (const auto& inv : gcp::cli::build_invariants()) quick += !inv.full_only;
  const auto rep = gcp::cli::run_validate(gcp::cli::Level::Quick, 11);
  EXPECT_EQ(static_cast<std::size_t>(rep.registered), quick);
  EXPECT_EQ(rep.results.size(), quick);
  // header + one line per invariant
  EXPECT_EQ(static_cast<std::size_t>(std::count(r.out.begin(), r.out.end(), '\n')), quick + 1);
  EXPECT_NE(r.err.find(std::to_string(quick) + " of " + std::to_string(quick)), std::string::npos);
}

TEST(Validate, InjectedNoiseFaultIsCaught) {
  const auto r = run({"validate", "--seed", "11"}, Fault::NoiseScale);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("qr_spectrum_beta0_closed_form"), std::string::npos);
  EXPECT_NE(r.out.find("qr_top_exponent_vs_lambda1,fail"), std::string::npos);
}

TEST(Validate, BetaSignFlipIsInvisibleInLaw) {
  // sqrt(rho/N) G - beta I = -(sqrt(rho/N) (-G) + beta I) and -G ~ G, so the
  // singular values, hence every exponent, keep their law.
  const auto rep = gcp::cli::run_validate(gcp::cli::Level::Quick, 11, Fault::FlipBetaSign);
  EXPECT_TRUE(rep.ok());
}

}  // namespace
