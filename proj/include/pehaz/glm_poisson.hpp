#pragma once

// Piecewise-exponential model fitted as a Poisson GLM with a log person-time
// offset: one indicator per bin (no intercept) plus linear covariate terms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/core_data.hpp"
#include "pehaz/hazard_estimate.hpp"
#include "pehaz/pe_likelihood.hpp"
#include "pehaz/stats.hpp"

namespace pehaz {

struct GLMOptions {
    int max_iterations = 100;
    double score_tolerance = 1e-8;
    double deviance_tolerance = 1e-10;
    int max_halvings = 20;
};

struct GLMFit {
    std::vector<std::string> names;  // bin_1..bin_J, fixed covariates, varying covariates
    Eigen::VectorXd coefficients;    // log lambda_j (-inf on boundary bins), beta, alpha
    Eigen::MatrixXd covariance;      // inverse Fisher information; +inf diagonal on boundary bins
    std::vector<bool> boundary;      // per bin: no events, rate estimate pinned at zero
    int bins = 0;
    int p = 0;
    int q = 0;
    bool converged = false;
    int iterations = 0;
    double deviance = 0.0;
    std::vector<double> deviance_trace;

    Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }

    HazardParams params() const
    {
        HazardParams hp;
        hp.lambda = coefficients.head(bins).array().exp();
        hp.beta = coefficients.segment(bins, p);
        hp.alpha = coefficients.tail(q);
        return hp;
    }
};

namespace detail {

// Rows of the Poisson regression: one per (group, bin) with positive person-time.
struct PoissonDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd offset;
    Eigen::VectorXd y;
};

inline double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu)
{
    double dev = 0.0;
    for (Eigen::Index r = 0; r < y.size(); ++r) {
        if (y(r) > 0.0) dev += y(r) * std::log(y(r) / mu(r));
        dev -= y(r) - mu(r);
    }
    return 2.0 * dev;
}

inline void check_rank(const Eigen::MatrixXd& x, const std::vector<std::string>& names)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() == x.cols()) return;
    std::string cols;
    for (Eigen::Index k = qr.rank(); k < x.cols(); ++k) {
        if (!cols.empty()) cols += ", ";
        cols += names[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
    }
    throw ValidationError("design matrix is rank deficient; collinear columns: " + cols);
}

}  // namespace detail

inline std::vector<std::string> glm_coefficient_names(const BinnedCohort& cohort)
{
    std::vector<std::string> names;
    for (int j = 0; j < cohort.bins(); ++j) names.push_back("bin_" + std::to_string(j + 1));
    names.insert(names.end(), cohort.fixed_names.begin(), cohort.fixed_names.end());
    names.insert(names.end(), cohort.varying_names.begin(), cohort.varying_names.end());
    return names;
}

inline GLMFit fit_glm(const BinnedCohort& cohort, const GLMOptions& options = {})
{
    cohort.validate();
    const int n = cohort.groups();
    const int J = cohort.bins();
    const int p = cohort.p();
    const int q = cohort.q();
    const auto exposures = compute_exposures(cohort);

    GLMFit fit;
    fit.names = glm_coefficient_names(cohort);
    fit.bins = J;
    fit.p = p;
    fit.q = q;
    fit.boundary.assign(static_cast<std::size_t>(J), false);

    Eigen::VectorXd events = Eigen::VectorXd::Zero(J);
    Eigen::VectorXd time = Eigen::VectorXd::Zero(J);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < J; ++j) {
            if (exposures.person_time(i, j) <= 0.0 && cohort.failures(i, j) > 0)
                throw ValidationError("events recorded with zero person-time at group " + std::to_string(i) +
                                      ", bin " + std::to_string(j));
            events(j) += static_cast<double>(cohort.failures(i, j));
            time(j) += exposures.person_time(i, j);
        }

    // Active columns: non-boundary bins, then every covariate.
    std::vector<int> bin_column(static_cast<std::size_t>(J), -1);
    std::vector<std::string> active_names;
    int active_bins = 0;
    for (int j = 0; j < J; ++j) {
        if (events(j) <= 0.0 || time(j) <= 0.0) {
            fit.boundary[static_cast<std::size_t>(j)] = true;
            continue;
        }
        bin_column[static_cast<std::size_t>(j)] = active_bins++;
        active_names.push_back(fit.names[static_cast<std::size_t>(j)]);
    }
    // With no events anywhere the effects have no information at all.
    const bool effects_free = active_bins == 0;
    const int cols = effects_free ? 0 : active_bins + p + q;
    for (int s = 0; s < p + q && !effects_free; ++s) active_names.push_back(fit.names[static_cast<std::size_t>(J + s)]);

    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < J; ++j)
            if (bin_column[static_cast<std::size_t>(j)] >= 0 && exposures.person_time(i, j) > 0.0) cells.emplace_back(i, j);

    detail::PoissonDesign d;
    const auto rows = static_cast<Eigen::Index>(cells.size());
    d.x = Eigen::MatrixXd::Zero(rows, cols);
    d.offset.resize(rows);
    d.y.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto [i, j] = cells[static_cast<std::size_t>(r)];
        d.x(r, bin_column[static_cast<std::size_t>(j)]) = 1.0;
        for (int s = 0; s < p; ++s) d.x(r, active_bins + s) = cohort.fixed_covariates(i, s);
        for (int s = 0; s < q; ++s) d.x(r, active_bins + p + s) = cohort.varying_covariates[static_cast<std::size_t>(s)](i, j);
        d.offset(r) = std::log(exposures.person_time(i, j));
        d.y(r) = static_cast<double>(cohort.failures(i, j));
    }

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(cols);
    if (cols > 0) detail::check_rank(d.x, active_names);
    for (int j = 0; j < J; ++j)
        if (bin_column[static_cast<std::size_t>(j)] >= 0)
            theta(bin_column[static_cast<std::size_t>(j)]) = std::log((events(j) + 0.5) / time(j));

    auto mean_of = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
        return (d.offset + d.x * th).array().exp().matrix();
    };
    Eigen::VectorXd mu = mean_of(theta);
    double dev = detail::poisson_deviance(d.y, mu);
    fit.deviance_trace.push_back(dev);

    for (int iter = 1; iter <= options.max_iterations && cols > 0; ++iter) {
        const Eigen::VectorXd score = d.x.transpose() * (d.y - mu);
        if (score.cwiseAbs().maxCoeff() < options.score_tolerance) {
            fit.converged = true;
            break;
        }
        const Eigen::MatrixXd info = d.x.transpose() * mu.asDiagonal() * d.x;
        const Eigen::VectorXd step = info.ldlt().solve(score);
        Eigen::VectorXd candidate = theta + step;
        Eigen::VectorXd mu_new = mean_of(candidate);
        double dev_new = detail::poisson_deviance(d.y, mu_new);
        for (int h = 0; h < options.max_halvings && !(dev_new <= dev); ++h) {
            candidate = theta + step * std::ldexp(1.0, -(h + 1));
            mu_new = mean_of(candidate);
            dev_new = detail::poisson_deviance(d.y, mu_new);
        }
        fit.iterations = iter;
        const double change = std::abs(dev - dev_new) / (std::abs(dev_new) + 0.1);
        if (!(dev_new <= dev)) {
            // No descent even after halving: either sitting on the optimum or stuck.
            fit.converged = change < options.deviance_tolerance;
            break;
        }
        theta = candidate;
        mu = mu_new;
        dev = dev_new;
        fit.deviance_trace.push_back(dev);
        if (change < options.deviance_tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (cols == 0) fit.converged = true;
    // One more Newton step takes a converged fit to full precision; kept only if the score shrinks.
    if (fit.converged && cols > 0) {
        const Eigen::VectorXd score = d.x.transpose() * (d.y - mu);
        const Eigen::MatrixXd info = d.x.transpose() * mu.asDiagonal() * d.x;
        const Eigen::VectorXd candidate = theta + info.ldlt().solve(score);
        const Eigen::VectorXd mu_new = mean_of(candidate);
        if ((d.x.transpose() * (d.y - mu_new)).cwiseAbs().maxCoeff() < score.cwiseAbs().maxCoeff()) {
            theta = candidate;
            mu = mu_new;
            dev = detail::poisson_deviance(d.y, mu);
        }
    }

    fit.deviance = dev;
    fit.coefficients = Eigen::VectorXd::Constant(J + p + q, -std::numeric_limits<double>::infinity());
    fit.covariance = Eigen::MatrixXd::Zero(J + p + q, J + p + q);
    std::vector<int> full_index;
    for (int j = 0; j < J; ++j)
        if (bin_column[static_cast<std::size_t>(j)] >= 0) full_index.push_back(j);
    for (int s = 0; s < p + q && !effects_free; ++s) full_index.push_back(J + s);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(cols, cols);
    if (cols > 0) {
        const Eigen::MatrixXd info = d.x.transpose() * mu.asDiagonal() * d.x;
        cov = info.ldlt().solve(Eigen::MatrixXd::Identity(cols, cols));
        cov = 0.5 * (cov + cov.transpose());
    }
    for (int a = 0; a < cols; ++a) {
        fit.coefficients(full_index[static_cast<std::size_t>(a)]) = theta(a);
        for (int b = 0; b < cols; ++b)
            fit.covariance(full_index[static_cast<std::size_t>(a)], full_index[static_cast<std::size_t>(b)]) = cov(a, b);
    }
    for (int j = 0; j < J; ++j)
        if (fit.boundary[static_cast<std::size_t>(j)]) fit.covariance(j, j) = std::numeric_limits<double>::infinity();
    if (effects_free)
        for (int s = J; s < J + p + q; ++s) {
            fit.coefficients(s) = std::numeric_limits<double>::quiet_NaN();
            fit.covariance(s, s) = std::numeric_limits<double>::infinity();
        }
    return fit;
}

// Fitted counts for each (group, bin); boundary bins predict zero.
inline Eigen::MatrixXd predict_counts(const GLMFit& fit, const BinnedCohort& cohort)
{
    if (cohort.bins() != fit.bins || cohort.p() != fit.p || cohort.q() != fit.q)
        throw ValidationError("cohort covariates do not match the fitted model");
    const auto expected = glm_coefficient_names(cohort);
    if (expected != fit.names) throw ValidationError("cohort covariate names do not match the fitted model");
    return fitted_counts(cohort, fit.params());
}

struct WaldInterval {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool boundary = false;
};

struct WaldIntervals {
    double level = 0.95;
    std::vector<WaldInterval> coefficients;  // log-rate and effect scale
    std::vector<HazardBin> hazard;           // rate scale, log-based and delta-method
};

inline WaldIntervals wald_intervals(const GLMFit& fit, double level)
{
    const double z = stats::normal_critical(level);
    const Eigen::VectorXd se = fit.standard_errors();
    const double inf = std::numeric_limits<double>::infinity();
    WaldIntervals out;
    out.level = level;
    for (Eigen::Index k = 0; k < fit.coefficients.size(); ++k) {
        WaldInterval w;
        w.name = fit.names[static_cast<std::size_t>(k)];
        w.estimate = fit.coefficients(k);
        w.se = se(k);
        w.boundary = k < fit.bins && fit.boundary[static_cast<std::size_t>(k)];
        w.lower = w.boundary ? -inf : w.estimate - z * w.se;
        w.upper = w.boundary ? inf : w.estimate + z * w.se;
        out.coefficients.push_back(w);
    }
    for (int j = 0; j < fit.bins; ++j) {
        HazardBin h;
        if (fit.boundary[static_cast<std::size_t>(j)]) {
            h = {0.0, 0.0, inf, 0.0, inf, true};
        } else {
            const double c = fit.coefficients(j);
            const double lambda = std::exp(c);
            h.estimate = lambda;
            h.lower = std::exp(c - z * se(j));
            h.upper = std::exp(c + z * se(j));
            h.lower_linear = lambda - z * lambda * se(j);
            h.upper_linear = lambda + z * lambda * se(j);
        }
        out.hazard.push_back(h);
    }
    return out;
}

inline HazardEstimate to_hazard_estimate(const GLMFit& fit, const BinGrid& grid, double level = 0.95)
{
    const auto w = wald_intervals(fit, level);
    HazardEstimate est;
    est.method = "glm";
    est.grid = grid;
    est.level = level;
    est.bins = w.hazard;
    for (int s = 0; s < fit.p + fit.q; ++s) {
        auto const& c = w.coefficients[static_cast<std::size_t>(fit.bins + s)];
        EffectSummary e{c.name, c.estimate, c.se, c.lower, c.upper};
        (s < fit.p ? est.fixed_effects : est.varying_effects).push_back(e);
    }
    if (!fit.converged) est.warnings.push_back("IWLS did not converge");
    for (int j = 0; j < fit.bins; ++j)
        if (fit.boundary[static_cast<std::size_t>(j)])
            est.warnings.push_back("bin " + std::to_string(j + 1) + " has no events; rate pinned at zero");
    return est;
}

}  // namespace pehaz
