#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/core_data.hpp"
#include "pehaz/pe_likelihood.hpp"

namespace pehaz {

// Per-bin baseline rate (per month). `lower`/`upper` is the primary interval
// (log-scale Wald for GLM/GAM, equal-tail credible for MRH); the `_linear`
// pair is the delta-method interval on the rate scale, which may go negative.
struct HazardBin {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double lower_linear = 0.0;
    double upper_linear = 0.0;
    bool boundary = false;
};

struct EffectSummary {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct HazardEstimate {
    std::string method;
    BinGrid grid;
    double level = 0.95;
    std::vector<HazardBin> bins;
    std::vector<EffectSummary> fixed_effects;
    std::vector<EffectSummary> varying_effects;
    std::vector<std::string> warnings;

    Eigen::VectorXd rates() const
    {
        Eigen::VectorXd r(static_cast<Eigen::Index>(bins.size()));
        for (std::size_t j = 0; j < bins.size(); ++j) r(static_cast<Eigen::Index>(j)) = bins[j].estimate;
        return r;
    }

    HazardParams params() const
    {
        HazardParams p;
        p.lambda = rates();
        p.beta.resize(static_cast<Eigen::Index>(fixed_effects.size()));
        for (std::size_t s = 0; s < fixed_effects.size(); ++s) p.beta(static_cast<Eigen::Index>(s)) = fixed_effects[s].estimate;
        p.alpha.resize(static_cast<Eigen::Index>(varying_effects.size()));
        for (std::size_t s = 0; s < varying_effects.size(); ++s)
            p.alpha(static_cast<Eigen::Index>(s)) = varying_effects[s].estimate;
        return p;
    }
};

// Y_ij = W_ij lambda_j exp(X_i'beta + Z_ij'alpha).
inline Eigen::MatrixXd fitted_counts(const BinnedCohort& cohort, const HazardParams& params)
{
    detail::check_params(cohort, params);
    const auto exposures = compute_exposures(cohort);
    Eigen::MatrixXd out(cohort.groups(), cohort.bins());
    for (int i = 0; i < cohort.groups(); ++i)
        for (int j = 0; j < cohort.bins(); ++j) {
            const double eta =
                cohort.linear_predictor(i, j, detail::as_span(params.beta), detail::as_span(params.alpha));
            out(i, j) = params.lambda(j) > 0.0 ? exposures.person_time(i, j) * params.lambda(j) * std::exp(eta) : 0.0;
        }
    return out;
}

}  // namespace pehaz
