#pragma once

// Poisson GAM: log mu = log W + g(t) + X'beta + Z'alpha, with g a penalized
// cyclic cubic regression spline evaluated at bin midpoints. The smoothing
// parameter is chosen by GCV over a log grid; each grid value is fitted by
// penalized IWLS.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/core_data.hpp"
#include "pehaz/cyclic_spline.hpp"
#include "pehaz/glm_poisson.hpp"
#include "pehaz/hazard_estimate.hpp"
#include "pehaz/pe_likelihood.hpp"
#include "pehaz/stats.hpp"

namespace pehaz {

inline std::vector<double> default_smoothing_grid()
{
    std::vector<double> grid;
    for (int k = 0; k < 30; ++k) grid.push_back(std::pow(10.0, -4.0 + 10.0 * k / 29.0));
    return grid;
}

struct GAMOptions {
    std::vector<double> smoothing_grid = default_smoothing_grid();
    GLMOptions pirls;
};

struct GAMFit {
    CyclicSplineBasis basis;
    std::vector<std::string> fixed_names;
    std::vector<std::string> varying_names;
    Eigen::VectorXd spline_coefficients;
    Eigen::VectorXd beta;
    Eigen::VectorXd alpha;
    Eigen::MatrixXd covariance;  // Bayesian posterior covariance (X'WX + sp S)^-1, spline block first
    double smoothing_parameter = 0.0;
    double edf = 0.0;        // effective degrees of freedom of the smooth
    double edf_total = 0.0;  // including linear terms
    double deviance = 0.0;
    double gcv = 0.0;
    std::vector<double> smoothing_grid;
    std::vector<double> gcv_scores;
    bool converged = false;
    bool gcv_at_grid_edge = false;
    bool no_events = false;
    int iterations = 0;

    double log_baseline(double t) const { return basis.evaluate(spline_coefficients, t); }
};

namespace detail {

struct GamDesign {
    PoissonDesign rows;
    int k = 0;
};

inline GamDesign gam_design(const BinnedCohort& cohort, const CyclicSplineBasis& basis)
{
    const auto exposures = compute_exposures(cohort);
    const int K = basis.dim();
    const int p = cohort.p();
    const int q = cohort.q();
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < cohort.groups(); ++i)
        for (int j = 0; j < cohort.bins(); ++j) {
            if (exposures.person_time(i, j) > 0.0)
                cells.emplace_back(i, j);
            else if (cohort.failures(i, j) > 0)
                throw ValidationError("events recorded with zero person-time at group " + std::to_string(i) +
                                      ", bin " + std::to_string(j));
        }
    GamDesign d;
    d.k = K;
    const auto rows = static_cast<Eigen::Index>(cells.size());
    d.rows.x = Eigen::MatrixXd::Zero(rows, K + p + q);
    d.rows.offset.resize(rows);
    d.rows.y.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto [i, j] = cells[static_cast<std::size_t>(r)];
        d.rows.x.row(r).head(K) = basis.design(cohort.grid.midpoint(j));
        for (int s = 0; s < p; ++s) d.rows.x(r, K + s) = cohort.fixed_covariates(i, s);
        for (int s = 0; s < q; ++s) d.rows.x(r, K + p + s) = cohort.varying_covariates[static_cast<std::size_t>(s)](i, j);
        d.rows.offset(r) = std::log(exposures.person_time(i, j));
        d.rows.y(r) = static_cast<double>(cohort.failures(i, j));
    }
    return d;
}

struct PirlsResult {
    Eigen::VectorXd theta;
    Eigen::VectorXd mu;
    double deviance = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline PirlsResult pirls(const GamDesign& d, const Eigen::MatrixXd& penalty, Eigen::VectorXd theta,
                         const GLMOptions& options)
{
    auto const& x = d.rows.x;
    auto mean_of = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
        return (d.rows.offset + x * th).array().exp().matrix();
    };
    auto objective = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& mu) {
        return poisson_deviance(d.rows.y, mu) + th.dot(penalty * th);
    };
    PirlsResult r;
    r.mu = mean_of(theta);
    double obj = objective(theta, r.mu);
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        const Eigen::VectorXd score = x.transpose() * (d.rows.y - r.mu) - penalty * theta;
        if (score.cwiseAbs().maxCoeff() < options.score_tolerance) {
            r.converged = true;
            break;
        }
        const Eigen::MatrixXd info = x.transpose() * r.mu.asDiagonal() * x + penalty;
        const Eigen::VectorXd step = info.ldlt().solve(score);
        Eigen::VectorXd candidate = theta + step;
        Eigen::VectorXd mu_new = mean_of(candidate);
        double obj_new = objective(candidate, mu_new);
        for (int h = 0; h < options.max_halvings && !(obj_new <= obj); ++h) {
            candidate = theta + step * std::ldexp(1.0, -(h + 1));
            mu_new = mean_of(candidate);
            obj_new = objective(candidate, mu_new);
        }
        r.iterations = iter;
        const double change = std::abs(obj - obj_new) / (std::abs(obj_new) + 0.1);
        if (!(obj_new <= obj)) {
            r.converged = change < options.deviance_tolerance;
            break;
        }
        theta = candidate;
        r.mu = mu_new;
        obj = obj_new;
        if (change < options.deviance_tolerance) {
            r.converged = true;
            break;
        }
    }
    r.theta = theta;
    r.deviance = poisson_deviance(d.rows.y, r.mu);
    return r;
}

}  // namespace detail

// Fits every smoothing value in options.smoothing_grid and keeps the GCV minimum.
inline GAMFit fit_gam(const BinnedCohort& cohort, int basis_dim, const GAMOptions& options = {})
{
    cohort.validate();
    if (options.smoothing_grid.empty()) throw ConfigError("smoothing grid is empty");
    for (double sp : options.smoothing_grid)
        if (!(sp >= 0.0)) throw ConfigError("smoothing parameters must be nonnegative");

    GAMFit fit;
    fit.basis = CyclicSplineBasis::make(basis_dim, kSeasonMonths);
    fit.fixed_names = cohort.fixed_names;
    fit.varying_names = cohort.varying_names;
    const int K = basis_dim;
    const int p = cohort.p();
    const int q = cohort.q();
    const int cols = K + p + q;
    fit.beta = Eigen::VectorXd::Zero(p);
    fit.alpha = Eigen::VectorXd::Zero(q);

    const auto design = detail::gam_design(cohort, fit.basis);
    const double events = design.rows.y.sum();
    const double time = design.rows.offset.array().exp().sum();
    if (events <= 0.0) {
        fit.no_events = true;
        fit.converged = true;
        fit.spline_coefficients = Eigen::VectorXd::Constant(K, -std::numeric_limits<double>::infinity());
        fit.covariance = Eigen::MatrixXd::Zero(cols, cols);
        return fit;
    }
    // The penalty pins down every spline direction except the constant, so
    // identifiability only needs [1 | X | Z] to have full column rank.
    {
        Eigen::MatrixXd null_space(design.rows.x.rows(), 1 + p + q);
        null_space.col(0).setOnes();
        null_space.rightCols(p + q) = design.rows.x.rightCols(p + q);
        std::vector<std::string> names{"s(t)"};
        names.insert(names.end(), cohort.fixed_names.begin(), cohort.fixed_names.end());
        names.insert(names.end(), cohort.varying_names.begin(), cohort.varying_names.end());
        detail::check_rank(null_space, names);
    }

    // Largest smoothing first so each fit warm-starts from a smoother one.
    std::vector<std::size_t> order(options.smoothing_grid.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return options.smoothing_grid[a] > options.smoothing_grid[b]; });

    Eigen::VectorXd start = Eigen::VectorXd::Zero(cols);
    start.head(K).setConstant(std::log(events / time));
    const double n = static_cast<double>(design.rows.y.size());
    fit.smoothing_grid = options.smoothing_grid;
    fit.gcv_scores.assign(order.size(), std::numeric_limits<double>::infinity());

    struct Candidate {
        detail::PirlsResult result;
        Eigen::MatrixXd covariance;
        double edf = 0.0;
        double edf_total = 0.0;
    };
    std::vector<Candidate> candidates(order.size());
    for (std::size_t idx : order) {
        const double sp = options.smoothing_grid[idx];
        Eigen::MatrixXd penalty = Eigen::MatrixXd::Zero(cols, cols);
        penalty.topLeftCorner(K, K) = sp * fit.basis.penalty();
        auto res = detail::pirls(design, penalty, start, options.pirls);
        const Eigen::MatrixXd info = design.rows.x.transpose() * res.mu.asDiagonal() * design.rows.x;
        Eigen::MatrixXd cov = (info + penalty).ldlt().solve(Eigen::MatrixXd::Identity(cols, cols));
        cov = 0.5 * (cov + cov.transpose());
        const Eigen::MatrixXd influence = cov * info;
        const double edf_total = influence.trace();
        const double resid_df = n - edf_total;
        fit.gcv_scores[idx] = resid_df > 0.0 ? n * res.deviance / (resid_df * resid_df)
                                             : std::numeric_limits<double>::infinity();
        start = res.theta;
        candidates[idx] = {std::move(res), std::move(cov), influence.diagonal().head(K).sum(), edf_total};
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < fit.gcv_scores.size(); ++k)
        if (fit.gcv_scores[k] < fit.gcv_scores[best]) best = k;
    auto& chosen = candidates[best];
    fit.smoothing_parameter = options.smoothing_grid[best];
    fit.gcv = fit.gcv_scores[best];
    fit.gcv_at_grid_edge = options.smoothing_grid.size() > 1 &&
                           (fit.smoothing_parameter == *std::min_element(options.smoothing_grid.begin(), options.smoothing_grid.end()) ||
                            fit.smoothing_parameter == *std::max_element(options.smoothing_grid.begin(), options.smoothing_grid.end()));
    fit.spline_coefficients = chosen.result.theta.head(K);
    fit.beta = chosen.result.theta.segment(K, p);
    fit.alpha = chosen.result.theta.tail(q);
    fit.covariance = chosen.covariance;
    fit.edf = chosen.edf;
    fit.edf_total = chosen.edf_total;
    fit.deviance = chosen.result.deviance;
    fit.converged = chosen.result.converged;
    fit.iterations = chosen.result.iterations;
    return fit;
}

// Fits a single smoothing value.
inline GAMFit fit_gam_fixed(const BinnedCohort& cohort, int basis_dim, double smoothing, GLMOptions pirls = {})
{
    GAMOptions options;
    options.smoothing_grid = {smoothing};
    options.pirls = pirls;
    return fit_gam(cohort, basis_dim, options);
}

// Fitted counts at bin midpoints, matching how the model was fitted.
inline Eigen::MatrixXd predict_counts(const GAMFit& fit, const BinnedCohort& cohort)
{
    if (cohort.fixed_names != fit.fixed_names || cohort.varying_names != fit.varying_names)
        throw ValidationError("cohort covariates do not match the fitted model");
    const auto exposures = compute_exposures(cohort);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cohort.groups(), cohort.bins());
    if (fit.no_events) return out;
    for (int i = 0; i < cohort.groups(); ++i)
        for (int j = 0; j < cohort.bins(); ++j) {
            const double eta = fit.log_baseline(cohort.grid.midpoint(j)) +
                               cohort.linear_predictor(i, j, detail::as_span(fit.beta), detail::as_span(fit.alpha));
            out(i, j) = exposures.person_time(i, j) * std::exp(eta);
        }
    return out;
}

// Bin average of exp(g(t)) by composite Simpson (16 panels), with delta-method
// intervals from the spline block of the covariance.
inline HazardEstimate extract_hazard(const GAMFit& fit, const BinGrid& grid, double level = 0.95)
{
    const double z = stats::normal_critical(level);
    const int K = fit.basis.dim();
    HazardEstimate est;
    est.method = "gam";
    est.grid = grid;
    est.level = level;
    constexpr int panels = 16;
    for (int j = 0; j < grid.bins; ++j) {
        HazardBin h;
        if (fit.no_events) {
            h = {0.0, 0.0, std::numeric_limits<double>::infinity(), 0.0, std::numeric_limits<double>::infinity(), true};
            est.bins.push_back(h);
            continue;
        }
        const double step = grid.width / panels;
        double avg = 0.0;
        Eigen::RowVectorXd grad = Eigen::RowVectorXd::Zero(K);
        for (int k = 0; k <= panels; ++k) {
            const double t = grid.start(j) + k * step;
            const double weight = (k == 0 || k == panels ? 1.0 : (k % 2 ? 4.0 : 2.0)) * step / 3.0 / grid.width;
            const Eigen::RowVectorXd row = fit.basis.design(t);
            const double value = std::exp(row.dot(fit.spline_coefficients));
            avg += weight * value;
            grad += weight * value * row;
        }
        const double var = (grad * fit.covariance.topLeftCorner(K, K) * grad.transpose())(0, 0);
        const double se = std::sqrt(std::max(var, 0.0));
        h.estimate = avg;
        h.lower = avg * std::exp(-z * se / avg);
        h.upper = avg * std::exp(z * se / avg);
        h.lower_linear = avg - z * se;
        h.upper_linear = avg + z * se;
        est.bins.push_back(h);
    }
    const int p = static_cast<int>(fit.beta.size());
    for (int s = 0; s < p + static_cast<int>(fit.alpha.size()); ++s) {
        const double value = s < p ? fit.beta(s) : fit.alpha(s - p);
        const double se = fit.no_events ? 0.0 : std::sqrt(std::max(fit.covariance(K + s, K + s), 0.0));
        const auto& name = s < p ? fit.fixed_names[static_cast<std::size_t>(s)] : fit.varying_names[static_cast<std::size_t>(s - p)];
        EffectSummary e{name, value, se, value - z * se, value + z * se};
        (s < p ? est.fixed_effects : est.varying_effects).push_back(e);
    }
    if (fit.no_events) est.warnings.push_back("no events; baseline rate pinned at zero");
    if (!fit.converged) est.warnings.push_back("penalized IWLS did not converge");
    if (fit.gcv_at_grid_edge) est.warnings.push_back("GCV minimum at the edge of the smoothing grid");
    return est;
}

}  // namespace pehaz
