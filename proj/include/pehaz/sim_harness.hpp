#pragma once

// Simulation study: synthetic seasonal cohorts with a mid-season hazard peak,
// two weather covariates and heavy censoring, fitted by all three estimators.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/core_data.hpp"
#include "pehaz/errors.hpp"
#include "pehaz/gam_poisson.hpp"
#include "pehaz/glm_poisson.hpp"
#include "pehaz/hazard_estimate.hpp"
#include "pehaz/mrh_sampler.hpp"
#include "pehaz/stats.hpp"

namespace pehaz {

struct SimulationConfig {
    int n_replicates = 20;
    int years = 10;
    int bins_per_year = 16;
    std::int64_t at_risk_per_bin = 150000;
    double censor_mean_per_bin = 120.0;
    double yearly_incidence = 0.00019;  // sum over bins of 1 - exp(-d_j)

    // Baseline shape: floor + (1 - floor) * raised cosine over bins
    // [peak_first_bin, peak_last_bin] (1-based), zero bump elsewhere.
    double hazard_floor = 0.2;
    int peak_first_bin = 7;
    int peak_last_bin = 12;

    // Weather: mean + amplitude * cos(2 pi (t - peak) / 12) + noise, t in
    // months since season start, standardized by fixed center and scale.
    double temp_mean = 35.4, temp_amplitude = 3.0, temp_peak = 8.5, temp_noise = 0.8;
    double temp_center = 35.4, temp_scale = 3.1;
    double humid_mean = 39.5, humid_amplitude = 25.0, humid_peak = 2.0, humid_noise = 5.0;
    double humid_center = 39.5, humid_scale = 20.6;
    std::vector<double> true_alpha{0.10, -0.05};

    std::uint64_t seed = 20240601;
    int gam_basis_dim = 16;
    int mcmc_iterations = 5000;
    int mcmc_burn_in = 500;
    int mcmc_thin = 10;
    double level = 0.95;
    int threads = 1;

    void validate() const
    {
        if (n_replicates < 1 || years < 1) throw ConfigError("n_replicates and years must be positive");
        if (bins_per_year < 2) throw ConfigError("bins_per_year must be at least 2");
        if (at_risk_per_bin < 1) throw ConfigError("at_risk_per_bin must be positive");
        if (!(censor_mean_per_bin >= 0.0)) throw ConfigError("censor_mean_per_bin must be nonnegative");
        if (!(yearly_incidence >= 0.0 && yearly_incidence < 1.0)) throw ConfigError("yearly_incidence must be in [0, 1)");
        if (!(hazard_floor >= 0.0 && hazard_floor <= 1.0)) throw ConfigError("hazard_floor must be in [0, 1]");
        if (peak_first_bin < 1 || peak_last_bin < peak_first_bin || peak_last_bin > bins_per_year)
            throw ConfigError("peak bins must satisfy 1 <= first <= last <= bins_per_year");
        if (true_alpha.size() != 2) throw ConfigError("true_alpha needs one value per weather covariate (2)");
        if (!(temp_scale > 0.0 && humid_scale > 0.0)) throw ConfigError("covariate scales must be positive");
        if (threads < 1) throw ConfigError("threads must be at least 1");
        if (mcmc_iterations <= mcmc_burn_in || mcmc_thin < 1) throw ConfigError("iterations must exceed burn_in; thin >= 1");
    }
};

struct SimulationTruth {
    Eigen::VectorXd d;       // per-bin hazard increments
    Eigen::VectorXd lambda;  // d / width, per month
    Eigen::VectorXd alpha;
};

// Unit-peak shape scaled so that sum_j (1 - exp(-d_j)) hits the incidence.
inline SimulationTruth true_hazard(const SimulationConfig& config)
{
    config.validate();
    const int J = config.bins_per_year;
    const double width = kSeasonMonths / J;
    Eigen::VectorXd shape(J);
    const double span = config.peak_last_bin - config.peak_first_bin + 1;
    for (int j = 1; j <= J; ++j) {
        double bump = 0.0;
        if (j >= config.peak_first_bin && j <= config.peak_last_bin) {
            const double x = (j - config.peak_first_bin + 0.5) / span;
            bump = std::pow(std::sin(std::numbers::pi * x), 2);
        }
        shape(j - 1) = config.hazard_floor + (1.0 - config.hazard_floor) * bump;
    }
    auto incidence = [&](double c) { return (1.0 - (-c * shape.array()).exp()).sum(); };
    const double reachable = static_cast<double>((shape.array() > 0.0).count());
    if (config.yearly_incidence >= reachable)
        throw ConfigError("yearly_incidence is unreachable with the configured hazard shape");
    double lo = 0.0, hi = 1.0;
    while (incidence(hi) < config.yearly_incidence) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
        const double mid = 0.5 * (lo + hi);
        (incidence(mid) < config.yearly_incidence ? lo : hi) = mid;
    }
    SimulationTruth t;
    t.d = config.yearly_incidence > 0.0 ? Eigen::VectorXd(0.5 * (lo + hi) * shape) : Eigen::VectorXd::Zero(J);
    t.lambda = t.d / width;
    t.alpha = Eigen::Map<const Eigen::VectorXd>(config.true_alpha.data(), 2);
    return t;
}

struct SimulatedDataset {
    BinnedCohort cohort;
    SimulationTruth truth;
};

// Each year is a group; every bin starts with a fresh at-risk population.
inline SimulatedDataset generate_dataset(const SimulationConfig& config, std::uint64_t replicate_seed)
{
    SimulatedDataset out;
    out.truth = true_hazard(config);
    const int n = config.years;
    const int J = config.bins_per_year;
    std::mt19937_64 rng(replicate_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::poisson_distribution<std::int64_t> censor(config.censor_mean_per_bin);

    auto& c = out.cohort;
    c.grid = BinGrid::make(J);
    c.failures = CountMatrix::Zero(n, J);
    c.censored = CountMatrix::Zero(n, J);
    c.at_risk = CountMatrix::Constant(n, J, config.at_risk_per_bin);
    c.occupancy = Eigen::MatrixXd::Constant(n, J, 0.5 * c.grid.width);
    c.fixed_covariates = Eigen::MatrixXd::Zero(n, 0);
    Eigen::MatrixXd temp(n, J), humid(n, J);
    const double N = static_cast<double>(config.at_risk_per_bin);
    for (int i = 0; i < n; ++i) {
        c.group_labels.push_back("year_" + std::to_string(i + 1));
        for (int j = 0; j < J; ++j) {
            const double t = c.grid.midpoint(j);
            const double raw_temp = config.temp_mean +
                                    config.temp_amplitude * std::cos(2.0 * std::numbers::pi * (t - config.temp_peak) / 12.0) +
                                    config.temp_noise * normal(rng);
            const double raw_humid = config.humid_mean +
                                     config.humid_amplitude * std::cos(2.0 * std::numbers::pi * (t - config.humid_peak) / 12.0) +
                                     config.humid_noise * normal(rng);
            temp(i, j) = (raw_temp - config.temp_center) / config.temp_scale;
            humid(i, j) = (raw_humid - config.humid_center) / config.humid_scale;
            const double eta = out.truth.alpha(0) * temp(i, j) + out.truth.alpha(1) * humid(i, j);
            const double mean_events = N * -std::expm1(-out.truth.d(j) * std::exp(eta));
            std::int64_t events = 0;
            if (mean_events > 0.0) events = std::poisson_distribution<std::int64_t>(mean_events)(rng);
            events = std::min(events, config.at_risk_per_bin);
            c.failures(i, j) = events;
            c.censored(i, j) = std::min(censor(rng), config.at_risk_per_bin - events);
        }
    }
    c.varying_covariates = {temp, humid};
    c.varying_names = {"temperature", "humidity"};
    c.transforms = {{"temperature", config.temp_center, config.temp_scale}, {"humidity", config.humid_center, config.humid_scale}};
    c.validate();
    return out;
}

struct BiasRmse {
    Eigen::VectorXd bias;  // mean of truth - estimate
    Eigen::VectorXd rmse;
};

inline BiasRmse compute_bias_rmse(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& truth)
{
    if (estimates.empty()) throw ValidationError("bias and RMSE need at least one replicate");
    BiasRmse r;
    r.bias = Eigen::VectorXd::Zero(truth.size());
    r.rmse = Eigen::VectorXd::Zero(truth.size());
    for (auto const& e : estimates) {
        if (e.size() != truth.size()) throw ValidationError("estimate length does not match truth");
        r.bias += truth - e;
        r.rmse += (truth - e).array().square().matrix();
    }
    const double n = static_cast<double>(estimates.size());
    r.bias /= n;
    r.rmse = (r.rmse / n).cwiseSqrt();
    return r;
}

struct EffectMetrics {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    double lower_quantile = 0.0;
    double upper_quantile = 0.0;
};

struct EstimatorMetrics {
    std::string method;
    int replicates_used = 0;
    int failures = 0;
    std::vector<std::string> failure_messages;
    Eigen::VectorXd mean, lower_quantile, upper_quantile, sd, bias, rmse, coverage;
    double integrated_abs_bias = 0.0;  // sum_j width * |bias_j|
    double integrated_rmse = 0.0;      // sum_j width * rmse_j
    double overall_coverage = 0.0;     // share of (bin, replicate) cells whose interval holds the truth
    std::vector<EffectMetrics> effects;
};

struct SimulationReport {
    SimulationConfig config;
    SimulationTruth truth;
    double bin_width = 0.0;
    double mean_censor_pct = 0.0;
    double mean_yearly_events = 0.0;
    std::vector<EstimatorMetrics> estimators;  // glm, gam, mrh

    const EstimatorMetrics& estimator(const std::string& method) const
    {
        for (auto const& e : estimators)
            if (e.method == method) return e;
        throw ValidationError("no estimator named " + method);
    }
};

namespace detail {

struct ReplicateResult {
    double censor_pct = 0.0;
    double yearly_events = 0.0;
    std::optional<HazardEstimate> fits[3];
    std::string errors[3];
};

inline ReplicateResult run_replicate(const SimulationConfig& config, int r)
{
    ReplicateResult out;
    const auto seed = stats::mix_seed(config.seed, static_cast<std::uint64_t>(r));
    const auto data = generate_dataset(config, seed);
    auto const& c = data.cohort;
    const double events = static_cast<double>(c.failures.sum());
    const double exits = events + static_cast<double>(c.censored.sum());
    out.censor_pct = exits > 0.0 ? 100.0 * static_cast<double>(c.censored.sum()) / exits : 0.0;
    out.yearly_events = events / config.years;

    auto attempt = [&](int slot, auto&& fit) {
        try {
            out.fits[slot] = fit();
        } catch (const std::exception& e) {
            out.errors[slot] = e.what();
        }
    };
    attempt(0, [&] { return to_hazard_estimate(fit_glm(c), c.grid, config.level); });
    attempt(1, [&] { return extract_hazard(fit_gam(c, config.gam_basis_dim), c.grid, config.level); });
    attempt(2, [&] {
        auto mc = default_mcmc_config(c);
        mc.iterations = config.mcmc_iterations;
        mc.burn_in = config.mcmc_burn_in;
        mc.thin = config.mcmc_thin;
        mc.seed = stats::mix_seed(seed, 1);
        return summarize_posterior(run_chain(c, mc), c.grid, config.level).estimate;
    });
    return out;
}

}  // namespace detail

inline EstimatorMetrics summarize_estimator(const std::string& method, const std::vector<HazardEstimate>& fits,
                                            const SimulationTruth& truth, double width)
{
    EstimatorMetrics m;
    m.method = method;
    m.replicates_used = static_cast<int>(fits.size());
    const auto J = truth.lambda.size();
    if (fits.empty()) return m;
    std::vector<Eigen::VectorXd> rates;
    for (auto const& f : fits) rates.push_back(f.rates());
    const auto br = compute_bias_rmse(rates, truth.lambda);
    m.bias = br.bias;
    m.rmse = br.rmse;
    for (Eigen::Index j = 0; j < J; ++j)
        if (m.rmse(j) < std::abs(m.bias(j)) * (1.0 - 1e-12))
            throw InternalError(method + ": RMSE below |bias| in bin " + std::to_string(j + 1));
    m.mean.resize(J);
    m.sd.resize(J);
    m.lower_quantile.resize(J);
    m.upper_quantile.resize(J);
    m.coverage.resize(J);
    long covered_total = 0;
    for (Eigen::Index j = 0; j < J; ++j) {
        std::vector<double> v;
        long covered = 0;
        for (std::size_t r = 0; r < fits.size(); ++r) {
            v.push_back(rates[r](j));
            auto const& b = fits[r].bins[static_cast<std::size_t>(j)];
            covered += b.lower <= truth.lambda(j) && truth.lambda(j) <= b.upper;
        }
        m.mean(j) = stats::mean(v);
        m.sd(j) = stats::sd(v);
        m.lower_quantile(j) = stats::quantile(v, 0.025);
        m.upper_quantile(j) = stats::quantile(v, 0.975);
        m.coverage(j) = static_cast<double>(covered) / static_cast<double>(fits.size());
        covered_total += covered;
    }
    m.integrated_abs_bias = width * m.bias.cwiseAbs().sum();
    m.integrated_rmse = width * m.rmse.sum();
    m.overall_coverage = static_cast<double>(covered_total) / static_cast<double>(fits.size() * static_cast<std::size_t>(J));
    for (std::size_t s = 0; s < fits.front().varying_effects.size(); ++s) {
        std::vector<double> v;
        for (auto const& f : fits) v.push_back(f.varying_effects[s].estimate);
        EffectMetrics e;
        e.name = fits.front().varying_effects[s].name;
        e.truth = s < static_cast<std::size_t>(truth.alpha.size()) ? truth.alpha(static_cast<Eigen::Index>(s)) : 0.0;
        e.mean = stats::mean(v);
        e.sd = stats::sd(v);
        e.lower_quantile = stats::quantile(v, 0.025);
        e.upper_quantile = stats::quantile(v, 0.975);
        m.effects.push_back(e);
    }
    return m;
}

// Replicates may run on several threads; results are reduced in index order,
// so the report does not depend on the thread count.
inline SimulationReport run_comparison(const SimulationConfig& config)
{
    config.validate();
    SimulationReport report;
    report.config = config;
    report.truth = true_hazard(config);
    report.bin_width = kSeasonMonths / config.bins_per_year;

    std::vector<detail::ReplicateResult> results(static_cast<std::size_t>(config.n_replicates));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < config.n_replicates; r = next++) results[static_cast<std::size_t>(r)] = detail::run_replicate(config, r);
    };
    const int threads = std::min(config.threads, config.n_replicates);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    const char* names[3] = {"glm", "gam", "mrh"};
    std::vector<HazardEstimate> fits[3];
    std::vector<std::string> errors[3];
    for (int r = 0; r < config.n_replicates; ++r) {
        auto& res = results[static_cast<std::size_t>(r)];
        report.mean_censor_pct += res.censor_pct / config.n_replicates;
        report.mean_yearly_events += res.yearly_events / config.n_replicates;
        for (int e = 0; e < 3; ++e) {
            if (res.fits[e])
                fits[e].push_back(std::move(*res.fits[e]));
            else
                errors[e].push_back("replicate " + std::to_string(r) + ": " + res.errors[e]);
        }
    }
    for (int e = 0; e < 3; ++e) {
        auto m = summarize_estimator(names[e], fits[e], report.truth, report.bin_width);
        m.failures = static_cast<int>(errors[e].size());
        m.failure_messages = std::move(errors[e]);
        report.estimators.push_back(std::move(m));
    }
    return report;
}

}  // namespace pehaz
