#pragma once

// Piecewise-exponential likelihood for grouped data: exposures, cumulative
// hazard, and the grouped and Poisson forms of the log-likelihood.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/core_data.hpp"

namespace pehaz {

struct ExposureTable {
    Eigen::MatrixXd phi;          // effective at-risk multiplier, person-bins
    Eigen::MatrixXd person_time;  // W = width * phi, months
};

struct HazardParams {
    Eigen::VectorXd lambda;  // per-month baseline rate in each bin
    Eigen::VectorXd beta;    // fixed covariate effects
    Eigen::VectorXd alpha;   // time-varying covariate effects
};

// A log-likelihood that may sit on the lambda_j = 0 boundary. `degenerate`
// marks -infinity (an event observed where the rate or occupancy is zero).
struct LogLikelihood {
    double value = 0.0;
    bool degenerate = false;

    static LogLikelihood negative_infinity() { return {-std::numeric_limits<double>::infinity(), true}; }
};

inline ExposureTable compute_exposures(const BinnedCohort& cohort)
{
    const double w = cohort.grid.width;
    ExposureTable t;
    t.phi.resize(cohort.groups(), cohort.bins());
    for (int i = 0; i < cohort.groups(); ++i) {
        for (int j = 0; j < cohort.bins(); ++j) {
            const auto exits = static_cast<double>(cohort.failures(i, j) + cohort.censored(i, j));
            t.phi(i, j) = cohort.occupancy(i, j) / w * exits + static_cast<double>(cohort.at_risk(i, j)) - exits;
        }
    }
    t.person_time = w * t.phi;
    return t;
}

namespace detail {

inline std::span<const double> as_span(const Eigen::VectorXd& v)
{
    return {v.data(), static_cast<std::size_t>(v.size())};
}

inline void check_params(const BinnedCohort& cohort, const HazardParams& params)
{
    if (params.lambda.size() != cohort.bins() || params.beta.size() != cohort.p() || params.alpha.size() != cohort.q())
        throw ValidationError("hazard parameter dimensions do not match the cohort");
}

}  // namespace detail

// exp(X_i'beta) * sum_j width * lambda_j * exp(Z_ij'alpha) * Phi_ij.
inline double cumulative_hazard(const BinnedCohort& cohort, const ExposureTable& exposures, const HazardParams& params,
                                int group)
{
    detail::check_params(cohort, params);
    double total = 0.0;
    for (int j = 0; j < cohort.bins(); ++j) {
        const double eta = cohort.linear_predictor(group, j, detail::as_span(params.beta), detail::as_span(params.alpha));
        total += cohort.grid.width * params.lambda(j) * std::exp(eta) * exposures.phi(group, j);
    }
    return total;
}

inline Eigen::VectorXd cumulative_hazard(const BinnedCohort& cohort, const HazardParams& params)
{
    const auto exposures = compute_exposures(cohort);
    Eigen::VectorXd out(cohort.groups());
    for (int i = 0; i < cohort.groups(); ++i) out(i) = cumulative_hazard(cohort, exposures, params, i);
    return out;
}

// sum_ij Delta_ij (log(tau_ij lambda_j) + X'beta + Z'alpha) - cumulative hazard.
inline LogLikelihood log_likelihood_grouped(const BinnedCohort& cohort, const HazardParams& params)
{
    detail::check_params(cohort, params);
    const auto exposures = compute_exposures(cohort);
    double ll = 0.0;
    for (int i = 0; i < cohort.groups(); ++i) {
        for (int j = 0; j < cohort.bins(); ++j) {
            const auto events = static_cast<double>(cohort.failures(i, j));
            const double eta = cohort.linear_predictor(i, j, detail::as_span(params.beta), detail::as_span(params.alpha));
            if (events > 0.0) {
                const double scaled = cohort.occupancy(i, j) * params.lambda(j);
                if (!(scaled > 0.0)) return LogLikelihood::negative_infinity();
                ll += events * (std::log(scaled) + eta);
            }
            ll -= cohort.grid.width * params.lambda(j) * std::exp(eta) * exposures.phi(i, j);
        }
    }
    return {ll, false};
}

// sum_ij y log mu - log y! - mu with mu_ij = W_ij lambda_j exp(X'beta + Z'alpha).
inline LogLikelihood log_likelihood_poisson(const BinnedCohort& cohort, const HazardParams& params)
{
    detail::check_params(cohort, params);
    const auto exposures = compute_exposures(cohort);
    double ll = 0.0;
    for (int i = 0; i < cohort.groups(); ++i) {
        for (int j = 0; j < cohort.bins(); ++j) {
            const auto y = static_cast<double>(cohort.failures(i, j));
            const double eta = cohort.linear_predictor(i, j, detail::as_span(params.beta), detail::as_span(params.alpha));
            const double mu = exposures.person_time(i, j) * params.lambda(j) * std::exp(eta);
            if (y > 0.0) {
                if (!(mu > 0.0)) return LogLikelihood::negative_infinity();
                ll += y * std::log(mu) - std::lgamma(y + 1.0);
            }
            ll -= mu;
        }
    }
    return {ll, false};
}

}  // namespace pehaz
