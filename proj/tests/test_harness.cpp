#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "hvlab/harness/compare.hpp"
#include "hvlab/harness/selftest.hpp"

using namespace hvlab;
using namespace hvlab::harness;

namespace {

const char* base_config = R"(schema_version: 1
dim: 1
grid: {M_per_N: 16, L: 10}
N_list: [4, 8, 16]
potential: {kind: gaussian, amplitude: 0.5, width: 1}
initial:
  kind: coherent
  coherent: {r: 0.5, p: 0.3, sigma_r: 1.25, sigma_p: 0.8}
T: 0.5
)";

RunConfig config_with(const std::string& extra) { return parse_config_text(std::string(base_config) + extra); }

std::string config_error(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "hvlab_test_harness" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST(FitRate, ExactLine) {
    auto f = fit_rate({{0.1, 0.1}, {0.05, 0.05}, {0.025, 0.025}});
    EXPECT_NEAR(f.slope, 1.0, 1e-12);
    EXPECT_NEAR(f.intercept, 0.0, 1e-12);
    EXPECT_NEAR(f.residual, 0.0, 1e-12);
}

TEST(FitRate, QuadraticData) {
    std::vector<std::pair<double, double>> pts;
    for (double e : {0.2, 0.1, 0.05, 0.025}) pts.emplace_back(e, 3 * e * e);
    auto f = fit_rate(pts);
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
}

TEST(FitRate, NoisyLinearData) {
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<std::pair<double, double>> pts;
    for (int k = 2; k <= 8; ++k) {
        double e = std::ldexp(1.0, -k);
        pts.emplace_back(e, e * (1 + noise(rng)));
    }
    auto f = fit_rate(pts);
    EXPECT_GE(f.slope, 0.9);
    EXPECT_LE(f.slope, 1.1);
}

TEST(FitRate, NonpositiveValuesAreDroppedWithWarning) {
    diag::drain();
    auto f = fit_rate({{0.1, 0.1}, {0.05, 0.0}, {0.04, 0.04}, {0.025, 0.025}});
    EXPECT_EQ(f.points, 3u);
    EXPECT_NEAR(f.slope, 1.0, 1e-12);
    EXPECT_EQ(diag::drain().size(), 1u);
    EXPECT_THROW(fit_rate({{0.1, 0.1}, {0.05, -1.0}, {0.025, 0.025}}), NumericalError);
}

TEST(Config, ParsesDefaults) {
    auto c = config_with("");
    EXPECT_EQ(c.N_list, (std::vector<std::uint64_t>{4, 8, 16}));
    EXPECT_EQ(c.grid_M(8), 128);
    EXPECT_DOUBLE_EQ(c.epsilon(1), 0.125);
    EXPECT_EQ(c.metrics, (std::vector<std::string>{"hs", "l2_wigner"}));
    EXPECT_EQ(c.initial.coherent.delta_rule, DeltaRule::sqrt_eps);
    EXPECT_EQ(c.mode, VlasovMode::grid);
    EXPECT_NO_THROW(check_static(c));
}

TEST(Config, UnknownKeyReportsLineAndField) {
    auto msg = config_error("schema_version: 1\ngrid: {M: 64}\nN_list: [4, 8, 16]\npotental: {kind: zero}\n");
    EXPECT_NE(msg.find("config:4:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("potental"), std::string::npos) << msg;
    msg = config_error("schema_version: 1\ngrid: {M: 64}\nN_list: [4, 8, 16]\ngrid: {M: 32}\n");
    EXPECT_NE(msg.find("config:4:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
    msg = config_error("schema_version: 1\ngrid:\n  M: 64\n  Lx: 3\nN_list: [4, 8, 16]\n");
    EXPECT_NE(msg.find("config:4:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("grid.Lx"), std::string::npos) << msg;
}

TEST(Config, BadValuesAreConfigErrors) {
    EXPECT_NE(config_error("schema_version: 2\ngrid: {M: 64}\nN_list: [4]\n").find("schema_version"), std::string::npos);
    EXPECT_NE(config_error("schema_version: 1\ngrid: {M: 64}\nN_list: [8, 4]\n").find("increasing"), std::string::npos);
    EXPECT_NE(config_error("schema_version: 1\ngrid: {M: 64}\nN_list: [4]\nmetrics: [hs, bogus]\n").find("bogus"),
              std::string::npos);
    EXPECT_NE(config_error("schema_version: 1\ngrid: {M: 64, M_per_N: 8}\nN_list: [4]\n").find("exactly one"),
              std::string::npos);
    EXPECT_NE(config_error("schema_version: 1\ngrid: {M: 64}\nN_list: [4]\nT: abc\n").find("config:4:"),
              std::string::npos);
    auto msg = config_error("schema_version: 1\ngrid: {M: 64\nN_list: [4]\n");
    EXPECT_NE(msg.find("syntax error"), std::string::npos) << msg;
    EXPECT_THROW(load_config("/nonexistent/config.yaml"), IoError);
}

TEST(Config, OffLatticeSemiclassicalPointIsRejected) {
    auto c = config_with("metrics: [semiclassical]\nsemiclassical: {p: [0.5], q: [0]}\n");
    EXPECT_THROW(check_static(c), ConfigError);
    c = config_with("metrics: [semiclassical]\nsemiclassical: {p: [0.6283185307179586], q: [0.625]}\n");
    EXPECT_NO_THROW(check_static(c));
}

TEST(Config, ResourceEstimateCoversDenseKernel) {
    auto c = config_with("");
    auto r = estimate_resources(c);
    EXPECT_GE(r.peak_bytes, 16.0 * 256 * 256);
}

TEST(Report, EmptyReportIsHeaderOnly) {
    RateReport r;
    EXPECT_EQ(metrics_csv(r), "N,epsilon,t,metric,raw,normalized\n");
    EXPECT_TRUE(parse_metrics_csv(metrics_csv(r)).empty());
}

TEST(Report, CsvRoundTripIsExact) {
    RateReport r;
    r.rows = {{4, 0.25, 0.5, "hs", 0.1 / 3, 1.0 / 7},
              {8, 0.125, 0.5, "trace", 1e-300, 6.02214076e23},
              {16, 0.0625, 0.5, "error", std::nan(""), std::nan("")}};
    EXPECT_EQ(parse_metrics_csv(metrics_csv(r)), r.rows);
    EXPECT_THROW(parse_metrics_csv("N,eps\n"), IoError);
    EXPECT_THROW(parse_metrics_csv(std::string(csv_header) + "\n4,0.1,0,hs,x,1\n"), IoError);
}

TEST(Report, EmitWritesFilesAndSurfacesPath) {
    RateReport r;
    r.rows = {{4, 0.25, 0.5, "hs", 1, 2}};
    r.fits["hs"] = {1.0, 0.0, 0.0, 3};
    auto dir = scratch("emit");
    emit_report(r, dir);
    EXPECT_EQ(slurp(dir / "metrics.csv"), metrics_csv(r));
    auto j = nlohmann::json::parse(slurp(dir / "fits.json"));
    EXPECT_EQ(j["fits"]["hs"]["slope"], 1.0);
    EXPECT_EQ(j["code_version"], code_version);
    try {
        emit_report(r, "/proc/hvlab_no_such_dir");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/proc/hvlab_no_such_dir"), std::string::npos);
    }
}

TEST(Report, YamlEchoKeepsTypes) {
    auto j = yaml_to_json(YAML::Load("a: 1\nb: 0.5\nc: [x, 'y', true]\nd: {e: '2'}\n"));
    EXPECT_EQ(j["a"], 1);
    EXPECT_EQ(j["b"], 0.5);
    EXPECT_EQ(j["c"][0], "x");
    EXPECT_EQ(j["c"][2], true);
    EXPECT_EQ(j["d"]["e"], "2");
}

TEST(Comparison, ZeroTimeGivesZeroDifferences) {
    auto c = config_with(
        "metrics: [trace, hs, l2_wigner, l2_limit, semiclassical]\n"
        "semiclassical: {p: [0, 0.6283185307179586], q: [0, 0.625]}\n");
    c.T = 0;
    auto r = run_comparison(c);
    ASSERT_TRUE(r.errors.empty());
    ASSERT_EQ(r.rows.size(), 3u * 5u);
    for (const auto& row : r.rows) {
        if (row.metric == "l2_limit") continue;  // W_N against the analytic M
        EXPECT_LE(row.normalized, 1e-10) << row.metric << " N=" << row.N;
    }
}

TEST(Comparison, FreeCoherentDynamicsAgree) {
    auto c = config_with("metrics: [l2_wigner]\n");
    c.potential.kind = PotentialKind::zero;
    auto r = run_comparison(c);
    ASSERT_TRUE(r.errors.empty());
    ASSERT_EQ(r.rows.size(), 3u);
    for (const auto& row : r.rows) EXPECT_LE(row.raw, 1e-6) << "N=" << row.N;
}

TEST(Comparison, ReportIsIndependentOfThreadCount) {
    auto c = config_with("metrics: [hs, l2_wigner, residual_B]\ntimes: [0.25]\n");
    auto a = run_comparison(c, 1, true);
    auto b = run_comparison(c, 3, true);
    EXPECT_EQ(metrics_csv(a), metrics_csv(b));
    EXPECT_EQ(a.rows.size(), 3u * 2u * 3u);
    EXPECT_EQ(a.fits.count("hs"), 1u);
}

TEST(Comparison, ResourceCeilingIsConfigError) {
    auto c = config_with("resources: {memory_limit_gb: 0.001}\n");
    EXPECT_THROW(run_comparison(c), ConfigError);
}

TEST(Comparison, DtHalvingChangesLittle) {
    auto c = config_with("");
    auto h = dt_halving_check(c);
    EXPECT_GT(h.dt, 0);
    EXPECT_LE(h.difference, 1e-3);
}

TEST(Evolve, WritesTrajectoryAndCheckpoints) {
    auto c = config_with("evolve: {N: 4, snapshot_every: 5}\n");
    c.T = 0.1;
    auto dir = scratch("evolve");
    auto s = run_evolve(c, dir);
    EXPECT_GT(s.hartree_steps, 0);
    EXPECT_GT(s.snapshots, 0);
    auto omega = io::read_kernel(dir / "omega_final.skdk");
    EXPECT_EQ(omega.N(), 4u);
    EXPECT_NEAR(omega.trace(), 4.0, 1e-9);
    auto W = io::read_wigner(dir / "vlasov_final.skwf");
    EXPECT_EQ(W.grid().spatial().M(), 64);
    auto csv = slurp(dir / "trajectory.csv");
    EXPECT_EQ(csv.rfind("t,trace,energy", 0), 0u);
}

TEST(Selftest, AllIdentitiesHold) {
    for (const auto& r : run_selftest()) EXPECT_TRUE(r.passed) << r.name << ": " << r.value << " " << r.message;
}
