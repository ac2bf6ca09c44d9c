#pragma once

// Command-line front end. Exit codes: 0 success, 2 bad input or settings,
// 1 internal failure (including unwritable output directories).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pehaz/core_data.hpp"
#include "pehaz/gam_poisson.hpp"
#include "pehaz/glm_poisson.hpp"
#include "pehaz/io.hpp"
#include "pehaz/mrh_sampler.hpp"
#include "pehaz/report.hpp"
#include "pehaz/sim_harness.hpp"
#include "pehaz/variance_analysis.hpp"

namespace pehaz::cli {

struct CommonArgs {
    std::string input;
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool full = false;
};

namespace detail {

// Set when a subcommand starts so runtime covers fitting as well as writing.
inline std::chrono::steady_clock::time_point& started()
{
    static std::chrono::steady_clock::time_point t = std::chrono::steady_clock::now();
    return t;
}

inline io::KeyValueConfig load_config(const CommonArgs& a)
{
    return a.config.empty() ? io::KeyValueConfig::parse("", "config") : io::KeyValueConfig::load(a.config);
}

inline std::filesystem::path prepare_out_dir(const CommonArgs& a)
{
    std::filesystem::path dir = a.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("PEHAZ_OUT_DIR");
        dir = env && *env ? env : "out";
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw InternalError("cannot create output directory " + dir.string());
    return dir;
}

struct Outputs {
    std::filesystem::path dir;
    report::Manifest manifest;
    std::chrono::steady_clock::time_point start;

    void write(const std::string& name, const std::string& text)
    {
        report::write_text(dir / name, text);
        manifest.outputs.emplace_back(name, io::sha256_hex(text));
    }

    void finish()
    {
        manifest.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report::write_text(dir / "manifest.json", manifest.to_json());
    }
};

inline Outputs begin(const std::string& subcommand, const CommonArgs& a, const io::KeyValueConfig& cfg, std::uint64_t seed)
{
    Outputs o;
    o.dir = prepare_out_dir(a);
    o.start = started();
    o.manifest.subcommand = subcommand;
    o.manifest.config = cfg.values();
    o.manifest.seed = seed;
    if (!a.input.empty()) {
        o.manifest.input_path = a.input;
        o.manifest.input_sha256 = io::sha256_hex(io::read_file(a.input));
    }
    return o;
}

struct CohortSettings {
    BinGrid grid;
    CohortOptions options;
    double level = 0.95;
};

inline CohortSettings cohort_settings(io::KeyValueConfig& cfg, int default_bins)
{
    CohortSettings s;
    s.grid = BinGrid::make(static_cast<int>(cfg.get_int("bins", default_bins)),
                           static_cast<int>(cfg.get_int("season_start_month", 7)));
    s.options.covariates = io::parse_covariate_spec(cfg.get_string("covariates", io::kDefaultCovariates));
    const auto tau = cfg.get_string("tau_rule", "mid");
    if (tau == "mid")
        s.options.tau_rule = TauRule::MidBin;
    else if (tau == "end")
        s.options.tau_rule = TauRule::EndOfBin;
    else
        throw ConfigError("tau_rule must be 'mid' or 'end'");
    s.options.standardize = cfg.get_bool("standardize", true);
    s.options.allow_population_extrapolation = cfg.get_bool("allow_population_extrapolation", false);
    s.level = cfg.get_double("level", 0.95);
    return s;
}

inline BinnedCohort load_cohort(const CommonArgs& a, const CohortSettings& s)
{
    if (a.input.empty()) throw ValidationError("--input is required");
    return build_binned_cohort(io::read_monthly_csv(a.input), s.grid, s.options);
}

inline void write_fit(Outputs& o, const BinnedCohort& cohort, const HazardEstimate& est, const Eigen::MatrixXd& fitted)
{
    o.manifest.warnings = est.warnings;
    const auto id = o.manifest.run_id();
    o.write("hazard.csv", report::hazard_csv(est, id));
    o.write("effects.csv", report::effects_csv(est, cohort.transforms, id));
    o.write("fitted_counts.csv", report::fitted_counts_csv(cohort, fitted, id));
    o.write("residuals.csv", report::residuals_csv(cohort, fitted, id));
}

inline int fit_glm_cmd(const CommonArgs& a)
{
    auto cfg = load_config(a);
    const auto s = cohort_settings(cfg, 12);
    GLMOptions opt;
    opt.max_iterations = static_cast<int>(cfg.get_int("max_iterations", opt.max_iterations));
    cfg.finish();
    const auto cohort = load_cohort(a, s);
    const auto fit = fit_glm(cohort, opt);
    const auto est = to_hazard_estimate(fit, cohort.grid, s.level);
    auto o = begin("fit-glm", a, cfg, 0);
    write_fit(o, cohort, est, predict_counts(fit, cohort));
    o.finish();
    return 0;
}

inline int fit_gam_cmd(const CommonArgs& a)
{
    auto cfg = load_config(a);
    const auto s = cohort_settings(cfg, 12);
    const int K = static_cast<int>(cfg.get_int("basis_dim", s.grid.bins));
    const double sp_min = cfg.get_double("sp_min", 1e-4);
    const double sp_max = cfg.get_double("sp_max", 1e6);
    const int sp_points = static_cast<int>(cfg.get_int("sp_points", 30));
    cfg.finish();
    GAMOptions opt;
    opt.smoothing_grid = log_spaced(sp_min, sp_max, sp_points);
    const auto cohort = load_cohort(a, s);
    const auto fit = fit_gam(cohort, K, opt);
    const auto est = extract_hazard(fit, cohort.grid, s.level);
    auto o = begin("fit-gam", a, cfg, 0);
    write_fit(o, cohort, est, predict_counts(fit, cohort));
    o.finish();
    return 0;
}

inline int fit_mrh_cmd(const CommonArgs& a)
{
    auto cfg = load_config(a);
    const auto s = cohort_settings(cfg, 16);
    const auto cohort = load_cohort(a, s);
    auto mc = default_mcmc_config(cohort);
    mc.iterations = static_cast<int>(cfg.get_int("iterations", mc.iterations));
    mc.burn_in = static_cast<int>(cfg.get_int("burn_in", mc.burn_in));
    mc.thin = static_cast<int>(cfg.get_int("thin", mc.thin));
    mc.seed = a.seed.value_or(cfg.get_uint("seed", 1));
    mc.mu_a = cfg.get_double("mu_a", mc.mu_a);
    mc.mu_b = cfg.get_double("mu_b", mc.mu_b);
    mc.mu_k = cfg.get_double("mu_k", mc.mu_k);
    mc.u = cfg.get_double("u", mc.u);
    mc.w = cfg.get_double("w", mc.w);
    mc.sigma_beta = cfg.get_double("sigma_beta", mc.sigma_beta);
    mc.sigma_alpha = cfg.get_double("sigma_alpha", mc.sigma_alpha);
    mc.a = static_cast<int>(cfg.get_int("a", mc.a));
    mc.b = cfg.get_double("b", mc.b);
    mc.k = cfg.get_double("k", mc.k);
    mc.gamma = cfg.get_double("gamma", mc.gamma);
    mc.sample_a = cfg.get_bool("sample_a", mc.sample_a);
    mc.sample_b = cfg.get_bool("sample_b", mc.sample_b);
    mc.sample_k = cfg.get_bool("sample_k", mc.sample_k);
    mc.sample_gamma = cfg.get_bool("sample_gamma", mc.sample_gamma);
    mc.r_concentration = cfg.get_double("r_concentration", mc.r_concentration);
    mc.gamma_concentration = cfg.get_double("gamma_concentration", mc.gamma_concentration);
    mc.effect_step = cfg.get_double("effect_step", mc.effect_step);
    mc.adapt = cfg.get_bool("adapt", mc.adapt);
    mc.target_acceptance = cfg.get_double("target_acceptance", mc.target_acceptance);
    cfg.finish();
    mc.validate();

    const auto chain = run_chain(cohort, mc);
    const auto summary = summarize_posterior(chain, cohort.grid, s.level);
    auto o = begin("fit-mrh", a, cfg, mc.seed);
    write_fit(o, cohort, summary.estimate, fitted_counts(cohort, summary.estimate.params()));
    const auto id = o.manifest.run_id();
    o.write("chain.csv", report::chain_csv(chain, id));
    o.write("chain_meta.json", report::chain_metadata_json(chain, summary, id));
    o.finish();
    return 0;
}

inline int simulate_cmd(const CommonArgs& a)
{
    auto cfg = load_config(a);
    SimulationConfig sc;
    sc.n_replicates = static_cast<int>(cfg.get_int("replicates", a.full ? 200 : sc.n_replicates));
    sc.years = static_cast<int>(cfg.get_int("years", sc.years));
    sc.bins_per_year = static_cast<int>(cfg.get_int("bins_per_year", sc.bins_per_year));
    sc.at_risk_per_bin = cfg.get_int("at_risk_per_bin", sc.at_risk_per_bin);
    sc.censor_mean_per_bin = cfg.get_double("censor_mean_per_bin", sc.censor_mean_per_bin);
    sc.yearly_incidence = cfg.get_double("yearly_incidence", sc.yearly_incidence);
    sc.hazard_floor = cfg.get_double("hazard_floor", sc.hazard_floor);
    sc.peak_first_bin = static_cast<int>(cfg.get_int("peak_first_bin", sc.peak_first_bin));
    sc.peak_last_bin = static_cast<int>(cfg.get_int("peak_last_bin", sc.peak_last_bin));
    sc.true_alpha = cfg.get_doubles("true_alpha", sc.true_alpha);
    sc.gam_basis_dim = static_cast<int>(cfg.get_int("gam_basis_dim", sc.gam_basis_dim));
    sc.mcmc_iterations = static_cast<int>(cfg.get_int("mcmc_iterations", sc.mcmc_iterations));
    sc.mcmc_burn_in = static_cast<int>(cfg.get_int("mcmc_burn_in", sc.mcmc_burn_in));
    sc.mcmc_thin = static_cast<int>(cfg.get_int("mcmc_thin", sc.mcmc_thin));
    sc.level = cfg.get_double("level", sc.level);
    sc.threads = static_cast<int>(cfg.get_int("threads", sc.threads));
    sc.seed = a.seed.value_or(cfg.get_uint("seed", sc.seed));
    cfg.finish();
    sc.validate();

    const auto rep = run_comparison(sc);
    auto o = begin("simulate", a, cfg, sc.seed);
    for (auto const& e : rep.estimators)
        if (e.failures) o.manifest.warnings.push_back(e.method + ": " + std::to_string(e.failures) + " replicate fits failed");
    const auto id = o.manifest.run_id();
    o.write("report.json", report::simulation_json(rep, id));
    o.write("per_bin.csv", report::simulation_per_bin_csv(rep, id));
    o.finish();
    return 0;
}

inline int variance_curves_cmd(const CommonArgs& a)
{
    auto cfg = load_config(a);
    VarianceCurveOptions v;
    v.N1 = cfg.get_double("N1", v.N1);
    v.N2 = cfg.get_double("N2", v.N2);
    v.a = cfg.get_double("a", v.a);
    v.k = cfg.get_double("k", v.k);
    v.points = static_cast<int>(cfg.get_int("points", v.points));
    v.H_min = cfg.get_double("H_min", v.H_min);
    v.H_max = cfg.get_double("H_max", v.H_max);
    v.R_values = cfg.get_doubles("R_values", v.R_values);
    cfg.finish();
    const auto rows = variance_curves(v);
    auto o = begin("variance-curves", a, cfg, 0);
    o.write("variance_curves.csv", report::variance_curves_csv(rows, o.manifest.run_id()));
    o.finish();
    return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr)
{
    CLI::App app{"Seasonal hazard estimation: piecewise-exponential GLM, cyclic GAM and multi-resolution hazard"};
    app.require_subcommand(1);
    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool needs_input) {
        auto* in = sub->add_option("--input", args.input, "monthly CSV input");
        if (needs_input) in->required();
        sub->add_option("--config", args.config, "key = value settings file");
        sub->add_option("--out-dir", args.out_dir, "output directory (default: $PEHAZ_OUT_DIR or ./out)");
        sub->add_option("--seed", args.seed, "random seed");
    };
    auto* glm = app.add_subcommand("fit-glm", "Poisson GLM with bin indicators");
    auto* gam = app.add_subcommand("fit-gam", "Poisson GAM with a cyclic cubic spline");
    auto* mrh = app.add_subcommand("fit-mrh", "Bayesian multi-resolution hazard model (MCMC)");
    auto* sim = app.add_subcommand("simulate", "simulation study comparing the three estimators");
    auto* var = app.add_subcommand("variance-curves", "two-bin variance difference curves");
    for (auto* s : {glm, gam, mrh}) add_common(s, true);
    add_common(sim, false);
    add_common(var, false);
    sim->add_flag("--full", args.full, "run 200 replicates instead of 20");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out;
        const int code = app.exit(e, out, err);
        std::cout << out.str();
        return code == 0 ? 0 : 2;
    }

    detail::started() = std::chrono::steady_clock::now();
    try {
        if (*glm) return detail::fit_glm_cmd(args);
        if (*gam) return detail::fit_gam_cmd(args);
        if (*mrh) return detail::fit_mrh_cmd(args);
        if (*sim) return detail::simulate_cmd(args);
        if (*var) return detail::variance_curves_cmd(args);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace pehaz::cli
