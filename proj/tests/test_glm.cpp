#include <gtest/gtest.h>

#include <cmath>

#include "pehaz/glm_poisson.hpp"
#include "pehaz/io.hpp"
#include "pehaz/sim_harness.hpp"
#include "test_support.hpp"

using namespace pehaz;

namespace {

BinnedCohort sample_cohort(int bins = 12)
{
    CohortOptions opt;
    opt.covariates = io::parse_covariate_spec(io::kDefaultCovariates);
    return build_binned_cohort(io::read_monthly_csv(test_util::sample_data()), BinGrid::make(bins), opt);
}

// X'(y - mu) evaluated from the fitted counts, one entry per design column.
Eigen::VectorXd score(const BinnedCohort& c, const Eigen::MatrixXd& mu, const std::vector<bool>& boundary)
{
    Eigen::VectorXd s = Eigen::VectorXd::Zero(c.bins() + c.p() + c.q());
    for (int i = 0; i < c.groups(); ++i)
        for (int j = 0; j < c.bins(); ++j) {
            if (boundary[static_cast<std::size_t>(j)]) continue;
            const double r = static_cast<double>(c.failures(i, j)) - mu(i, j);
            s(j) += r;
            for (int k = 0; k < c.p(); ++k) s(c.bins() + k) += c.fixed_covariates(i, k) * r;
            for (int k = 0; k < c.q(); ++k) s(c.bins() + c.p() + k) += c.varying_covariates[static_cast<std::size_t>(k)](i, j) * r;
        }
    return s;
}

}  // namespace

TEST(GLM, SingleBinClosedForm)
{
    auto c = test_util::make_cohort(3, 2, 1000);
    c.failures << 4, 0, 7, 0, 2, 0;
    c.censored << 10, 986, 0, 993, 30, 968;
    c.occupancy.col(0) << 1.5, 4.0, 2.5;
    const auto fit = fit_glm(c);
    const auto W = compute_exposures(c).person_time;
    EXPECT_NEAR(std::exp(fit.coefficients(0)), 13.0 / W.col(0).sum(), 1e-15);
    EXPECT_TRUE(fit.converged);
    EXPECT_TRUE(fit.boundary[1]);
    EXPECT_TRUE(std::isinf(fit.coefficients(1)));
    EXPECT_TRUE(std::isinf(fit.covariance(1, 1)));
}

TEST(GLM, ScoreEquationsOnSample)
{
    const auto c = sample_cohort();
    const auto fit = fit_glm(c);
    ASSERT_TRUE(fit.converged);
    const auto s = score(c, predict_counts(fit, c), fit.boundary);
    EXPECT_LT(s.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GLM, FittedTotalsMatchObserved)
{
    auto c = test_util::make_cohort(2, 4, 500);
    c.failures << 3, 1, 0, 5, 2, 2, 1, 4;
    const auto fit = fit_glm(c);
    const auto mu = predict_counts(fit, c);
    EXPECT_NEAR(mu.sum(), static_cast<double>(c.failures.sum()), 1e-9);
}

TEST(GLM, ZeroPersonTimePredictsZero)
{
    auto c = test_util::make_cohort(2, 2, 100);
    c.failures << 2, 1, 3, 0;
    c.at_risk(1, 1) = 0;
    c.censored(1, 0) = 97;
    c.occupancy(1, 0) = 3.0;
    const auto fit = fit_glm(c);
    EXPECT_EQ(predict_counts(fit, c)(1, 1), 0.0);
}

TEST(GLM, RankDeficiencyNamesColumns)
{
    auto c = test_util::make_cohort(3, 4, 500);
    c.failures.setConstant(2);
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 4);
    z.col(2).setOnes();  // duplicates the bin_3 indicator
    c.varying_covariates = {z};
    c.varying_names = {"dupe"};
    try {
        fit_glm(c);
        FAIL() << "expected a rank error";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("collinear"), std::string::npos);
        EXPECT_TRUE(msg.find("dupe") != std::string::npos || msg.find("bin_3") != std::string::npos);
    }
}

TEST(GLM, RecoversSimulatedEffects)
{
    // Estimates within 3 SE of truth in nearly all replicates.
    SimulationConfig cfg;
    cfg.at_risk_per_bin = 2000000;
    const auto truth = true_hazard(cfg);
    int inside = 0, total = 0;
    for (int r = 0; r < 40; ++r) {
        const auto data = generate_dataset(cfg, stats::mix_seed(99, r));
        const auto fit = fit_glm(data.cohort);
        const auto se = fit.standard_errors();
        for (int j = 0; j < fit.bins; ++j, ++total)
            inside += std::abs(fit.coefficients(j) - std::log(truth.lambda(j))) < 3 * se(j);
        for (int s = 0; s < 2; ++s, ++total)
            inside += std::abs(fit.coefficients(fit.bins + s) - truth.alpha(s)) < 3 * se(fit.bins + s);
    }
    EXPECT_GE(inside, 0.99 * total);
}

TEST(Wald, Intervals)
{
    GLMFit fit;
    fit.names = {"bin_1", "bin_2", "z"};
    fit.bins = 2;
    fit.q = 1;
    fit.boundary = {false, true};
    fit.coefficients = Eigen::Vector3d(std::log(0.02), -INFINITY, 0.3);
    fit.covariance = Eigen::Matrix3d::Zero();
    fit.covariance(1, 1) = INFINITY;
    auto w = wald_intervals(fit, 0.95);
    EXPECT_DOUBLE_EQ(w.hazard[0].lower, w.hazard[0].estimate);
    EXPECT_DOUBLE_EQ(w.hazard[0].upper, w.hazard[0].estimate);
    EXPECT_DOUBLE_EQ(w.coefficients[2].lower, 0.3);
    EXPECT_TRUE(w.hazard[1].boundary);
    EXPECT_EQ(w.hazard[1].estimate, 0.0);
    EXPECT_TRUE(std::isinf(w.hazard[1].upper));

    // Large SE: log interval stays positive, delta-method one crosses zero.
    fit.covariance(0, 0) = 1.0;
    w = wald_intervals(fit, 0.95);
    EXPECT_GT(w.hazard[0].lower, 0.0);
    EXPECT_LT(w.hazard[0].lower_linear, 0.0);
    EXPECT_NEAR(w.hazard[0].upper, 0.02 * std::exp(1.959963984540054), 1e-12);
}

TEST(GLM, HazardEstimateCarriesWarnings)
{
    const auto c = sample_cohort();
    const auto fit = fit_glm(c);
    const auto est = to_hazard_estimate(fit, c.grid, 0.9);
    EXPECT_EQ(est.method, "glm");
    EXPECT_EQ(est.bins.size(), 12u);
    EXPECT_EQ(est.varying_effects.size(), 6u);
    int boundary = 0;
    for (auto const& b : est.bins) boundary += b.boundary;
    EXPECT_EQ(static_cast<std::size_t>(boundary), est.warnings.size());
}

TEST(GLM, PredictRejectsMismatchedCohort)
{
    const auto c = sample_cohort();
    const auto fit = fit_glm(c);
    auto other = c;
    other.varying_names[0] = "renamed";
    EXPECT_THROW(predict_counts(fit, other), ValidationError);
}
