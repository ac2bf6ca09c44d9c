#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include "json.hpp"
#include "pehaz/cli.hpp"
#include "pehaz/io.hpp"
#include "pehaz/report.hpp"
#include "test_support.hpp"

using namespace pehaz;

namespace {

const char* kHeader = "year,month,cases,tmax_c,tmin_c,humidity3pm_pct,dust_pct,co_g_per_day,pneumonia,population\n";

std::string first_data_line(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') return line;
    return {};
}

int run_cli(std::vector<std::string> args, std::string* err = nullptr)
{
    args.insert(args.begin(), "pehaz_cli");
    std::vector<const char*> argv;
    for (auto const& a : args) argv.push_back(a.c_str());
    std::ostringstream es;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), es);
    if (err) *err = es.str();
    return code;
}

std::string slurp(const std::filesystem::path& p) { return io::read_file(p); }

}  // namespace

TEST(Format, RoundTrip17Digits)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, i % 20 - 10);
        EXPECT_EQ(io::parse_double(io::fmt(x), ""), x);
    }
    EXPECT_EQ(io::fmt(INFINITY), "inf");
    EXPECT_EQ(io::parse_double("inf", ""), INFINITY);
}

TEST(Sha256, KnownVector)
{
    EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(MonthlyCsv, ParsesNaAndAnchors)
{
    const std::string text = std::string(kHeader) +
                             "2000,7,1,35,22,40,NA,0,1,1000\n"
                             "2000,8,0,34,21,41,5,0,0,NA\n"
                             "2000,9,2,33,20,42,6,0,2,1010\n";
    const auto raw = io::parse_monthly_csv(text);
    EXPECT_EQ(raw.first_month, month_id(2000, 7));
    EXPECT_EQ(raw.size(), 3);
    EXPECT_FALSE(raw.covariate("dust_pct")[0].has_value());
    EXPECT_EQ(*raw.covariate("dust_pct")[1], 5.0);
    ASSERT_EQ(raw.population_anchors.size(), 2u);
    EXPECT_EQ(raw.population_anchors[1].population, 1010);
}

TEST(MonthlyCsv, Errors)
{
    EXPECT_THROW(io::parse_monthly_csv("year,month\n2000,1\n"), ValidationError);
    EXPECT_THROW(io::parse_monthly_csv(std::string(kHeader) + "2000,7,1,35,22,40,1,0,1,1000\n2000,9,1,35,22,40,1,0,1,NA\n"),
                 ValidationError);
    EXPECT_THROW(io::parse_monthly_csv(std::string(kHeader) + "2000,7,-1,35,22,40,1,0,1,1000\n"), ValidationError);
    EXPECT_THROW(io::parse_monthly_csv(std::string(kHeader) + "2000,7,x,35,22,40,1,0,1,1000\n"), ValidationError);
    EXPECT_THROW(io::parse_monthly_csv(std::string(kHeader) + "2000,7,1,35\n"), ValidationError);
    try {
        io::read_monthly_csv("/nonexistent/input.csv");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/input.csv"), std::string::npos);
    }
}

TEST(Config, TypedGettersAndUnknownKeys)
{
    auto c = io::KeyValueConfig::parse("# comment\nbins = 16\nlevel=0.9  # trailing\nflag = yes\nlist = 1, 2,3\n");
    EXPECT_EQ(c.get_int("bins", 12), 16);
    EXPECT_DOUBLE_EQ(c.get_double("level", 0.95), 0.9);
    EXPECT_TRUE(c.get_bool("flag", false));
    EXPECT_EQ(c.get_doubles("list", {}), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(c.get_int("missing", 7), 7);
    EXPECT_NO_THROW(c.finish());

    auto bad = io::KeyValueConfig::parse("bins = twelve\ntypo = 1\n");
    EXPECT_THROW(bad.get_int("bins", 12), ConfigError);
    EXPECT_THROW(bad.finish(), ConfigError);
    EXPECT_THROW(io::KeyValueConfig::parse("no equals sign\n"), ConfigError);
    EXPECT_THROW(io::KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
}

TEST(Config, CovariateSpec)
{
    const auto sel = io::parse_covariate_spec("tmax_c:0, pneumonia:2");
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_EQ(sel[1].column, "pneumonia");
    EXPECT_EQ(sel[1].lag, 2);
    EXPECT_TRUE(io::parse_covariate_spec("none").empty());
    EXPECT_THROW(io::parse_covariate_spec("rainfall:1"), ConfigError);
    EXPECT_THROW(io::parse_covariate_spec("tmax_c:-1"), ConfigError);
}

TEST(Report, HazardCsvRoundTrip)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1e-4);
    HazardEstimate est;
    est.grid = BinGrid::make(16);
    for (int j = 0; j < 16; ++j) {
        const double x = u(rng);
        est.bins.push_back({x, x / 3, x * 3, x - u(rng), x + u(rng), j == 3});
    }
    est.bins[5].upper = INFINITY;
    const auto parsed = report::parse_hazard_csv(report::hazard_csv(est, "id"));
    ASSERT_EQ(parsed.size(), est.bins.size());
    for (std::size_t j = 0; j < parsed.size(); ++j) {
        EXPECT_EQ(parsed[j].estimate, est.bins[j].estimate);
        EXPECT_EQ(parsed[j].lower, est.bins[j].lower);
        EXPECT_EQ(parsed[j].upper, est.bins[j].upper);
        EXPECT_EQ(parsed[j].lower_linear, est.bins[j].lower_linear);
        EXPECT_EQ(parsed[j].upper_linear, est.bins[j].upper_linear);
        EXPECT_EQ(parsed[j].boundary, est.bins[j].boundary);
    }
}

TEST(Report, GoldenHeaders)
{
    HazardEstimate est;
    est.grid = BinGrid::make(2);
    const auto c = test_util::make_cohort(1, 2, 10);
    const Eigen::MatrixXd fitted = Eigen::MatrixXd::Zero(1, 2);
    EXPECT_EQ(first_data_line(report::hazard_csv(est, "x")),
              "bin,start_month,end_month,rate,lower,upper,lower_linear,upper_linear,boundary");
    EXPECT_EQ(first_data_line(report::effects_csv(est, {}, "x")), "kind,name,estimate,se,lower,upper,center,scale");
    EXPECT_EQ(first_data_line(report::fitted_counts_csv(c, fitted, "x")), "group,bin,observed,fitted");
    EXPECT_EQ(first_data_line(report::residuals_csv(c, fitted, "x")),
              "group,bin,difference,abs_difference,integrated_abs,integrated_sq_root");
    EXPECT_EQ(first_data_line(report::variance_curves_csv({}, "x")), "R,H,censor_pct,g1,g2,var_glm1,var_mrh1");
    SimulationReport rep;
    EXPECT_EQ(first_data_line(report::simulation_per_bin_csv(rep, "x")), "method,bin,truth,mean,q025,q975,sd,bias,rmse,coverage");
    PosteriorChain chain;
    chain.depth = 1;
    chain.varying_names = {"z"};
    EXPECT_EQ(first_data_line(report::chain_csv(chain, "x")), "iteration,H,R_1_0,alpha_z,a,b,k,gamma_1_0,d_1,d_2");
    EXPECT_EQ(report::hazard_csv(est, "abc").substr(0, 13), "# run_id=abc\n");
}

TEST(Report, ResidualsZeroEventsAndWidthWeight)
{
    auto c = test_util::make_cohort(1, 16, 100);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 16);
    c.failures(0, 0) = 2;
    c.failures(0, 1) = 1;
    const auto text = report::residuals_csv(c, zero, "x");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) rows.push_back(io::split(line));
    ASSERT_EQ(rows.size(), 16u);
    // Bin width 12/16 weights the running totals.
    EXPECT_EQ(io::parse_double(rows[0][4], ""), 0.75 * 2);
    EXPECT_EQ(io::parse_double(rows[1][4], ""), 0.75 * 3);
    EXPECT_NEAR(io::parse_double(rows[1][5], ""), std::sqrt(0.75 * 5), 1e-15);
    EXPECT_EQ(io::parse_double(rows[15][4], ""), 0.75 * 3);
    // No fitted events: residuals equal the observed counts.
    for (int j = 0; j < 16; ++j) EXPECT_EQ(io::parse_double(rows[j][2], ""), static_cast<double>(c.failures(0, j)));
}

TEST(Report, RunIdIgnoresRuntime)
{
    report::Manifest m;
    m.subcommand = "fit-glm";
    m.seed = 3;
    const auto id = m.run_id();
    m.runtime_seconds = 12.5;
    m.outputs.emplace_back("hazard.csv", "00");
    EXPECT_EQ(m.run_id(), id);
    m.seed = 4;
    EXPECT_NE(m.run_id(), id);
    const auto j = nlohmann::json::parse(m.to_json());
    EXPECT_EQ(j["run_id"], m.run_id());
    EXPECT_EQ(j["software_version"], report::kSoftwareVersion);
}

TEST(Cli, FitGlmHappyPath)
{
    const auto dir = test_util::scratch_dir("glm");
    ASSERT_EQ(run_cli({"fit-glm", "--input", test_util::sample_data().string(), "--out-dir", dir.string()}), 0);
    for (auto f : {"hazard.csv", "effects.csv", "fitted_counts.csv", "residuals.csv", "manifest.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    const std::string id = manifest["run_id"];
    EXPECT_EQ(slurp(dir / "hazard.csv").substr(0, 9 + id.size()), "# run_id=" + id);
    for (auto const& o : manifest["outputs"])
        EXPECT_EQ(io::sha256_hex(slurp(dir / o["file"].get<std::string>())), o["sha256"]);
    EXPECT_EQ(manifest["input_sha256"], io::sha256_hex(slurp(test_util::sample_data())));
}

TEST(Cli, FitGamWritesOutputs)
{
    const auto dir = test_util::scratch_dir("gam");
    std::ofstream(dir / "gam.cfg") << "basis_dim = 10\ncovariates = tmax_c:0,co_g_per_day:1\n";
    ASSERT_EQ(run_cli({"fit-gam", "--input", test_util::sample_data().string(), "--config", (dir / "gam.cfg").string(),
                       "--out-dir", dir.string()}),
              0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["config"]["basis_dim"], "10");
}

TEST(Cli, ExitCodes)
{
    std::string err;
    const auto dir = test_util::scratch_dir("codes");
    EXPECT_EQ(run_cli({"fit-glm", "--input", "/nonexistent/x.csv", "--out-dir", dir.string()}, &err), 2);
    EXPECT_NE(err.find("/nonexistent/x.csv"), std::string::npos);

    std::ofstream(dir / "mcmc.cfg") << "iterations = 400\nburn_in = 500\n";
    EXPECT_EQ(run_cli({"fit-mrh", "--input", test_util::sample_data().string(), "--config", (dir / "mcmc.cfg").string(),
                       "--out-dir", dir.string()},
                      &err),
              2);
    EXPECT_NE(err.find("burn_in"), std::string::npos);

    std::ofstream(dir / "typo.cfg") << "bins = 12\nbinz = 16\n";
    EXPECT_EQ(run_cli({"fit-glm", "--input", test_util::sample_data().string(), "--config", (dir / "typo.cfg").string(),
                       "--out-dir", dir.string()},
                      &err),
              2);
    EXPECT_NE(err.find("binz"), std::string::npos);

    EXPECT_EQ(run_cli({"fit-glm", "--bogus-flag"}), 2);
    EXPECT_EQ(run_cli({}), 2);
    EXPECT_EQ(run_cli({"fit-mrh", "--input", test_util::sample_data().string(), "--out-dir", "/proc/forbidden"}, &err), 1);
}

TEST(Cli, OutDirFromEnvironment)
{
    const auto dir = test_util::scratch_dir("env");
    ::setenv("PEHAZ_OUT_DIR", dir.string().c_str(), 1);
    const int code = run_cli({"variance-curves"});
    ::unsetenv("PEHAZ_OUT_DIR");
    ASSERT_EQ(code, 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "variance_curves.csv"));
}

TEST(Cli, FitMrhReproducible)
{
    const auto a = test_util::scratch_dir("mrh_a");
    const auto b = test_util::scratch_dir("mrh_b");
    std::ofstream(a / "short.cfg") << "iterations = 1500\nburn_in = 300\nthin = 3\n";
    for (auto const& d : {a, b})
        ASSERT_EQ(run_cli({"fit-mrh", "--input", test_util::sample_data().string(), "--config", (a / "short.cfg").string(),
                           "--seed", "7", "--out-dir", d.string()}),
                  0);
    for (auto f : {"hazard.csv", "effects.csv", "chain.csv", "chain_meta.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}
