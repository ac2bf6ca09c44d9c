#pragma once

// Multi-resolution hazard model. The season's cumulative baseline hazard H is
// split down a dyadic tree: node (m, p) hands a fraction R[m][p] of its hazard
// to its left child. Leaf increments are d_j = H * F_j.
//
// Sampler: Gibbs for H; Metropolis-Hastings for everything else, with
// proposal scales adapted during burn-in only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/core_data.hpp"
#include "pehaz/errors.hpp"
#include "pehaz/hazard_estimate.hpp"
#include "pehaz/pe_likelihood.hpp"
#include "pehaz/stats.hpp"

namespace pehaz {

// Levels are stored 0-based: R[m - 1][p] is split parameter R_{m,p}.
struct MRHTree {
    int M = 1;
    double H = 1.0;
    std::vector<std::vector<double>> R;
    int a = 1;
    double b = 1.0;
    double k = 1.0;
    std::vector<std::vector<double>> gamma;

    static MRHTree uniform(int depth, double H = 1.0)
    {
        if (depth < 1) throw ConfigError("tree depth must be at least 1");
        MRHTree t;
        t.M = depth;
        t.H = H;
        for (int m = 1; m <= depth; ++m) {
            t.R.emplace_back(std::size_t{1} << (m - 1), 0.5);
            t.gamma.emplace_back(std::size_t{1} << (m - 1), 0.5);
        }
        return t;
    }

    int bins() const { return 1 << M; }

    void validate() const
    {
        if (M < 1 || static_cast<int>(R.size()) != M || static_cast<int>(gamma.size()) != M)
            throw ValidationError("tree levels do not match depth");
        if (!(H > 0.0) || !std::isfinite(H)) throw ValidationError("cumulative hazard H must be positive");
        for (int m = 0; m < M; ++m) {
            if (R[static_cast<std::size_t>(m)].size() != (std::size_t{1} << m) ||
                gamma[static_cast<std::size_t>(m)].size() != (std::size_t{1} << m))
                throw ValidationError("tree level " + std::to_string(m + 1) + " has the wrong number of nodes");
            for (std::size_t p = 0; p < R[static_cast<std::size_t>(m)].size(); ++p) {
                const double r = R[static_cast<std::size_t>(m)][p];
                const double g = gamma[static_cast<std::size_t>(m)][p];
                if (!(r > 0.0 && r < 1.0) || !(g > 0.0 && g < 1.0))
                    throw ValidationError("split parameters must lie in (0, 1) at level " + std::to_string(m + 1));
            }
        }
        if (a < 1 || !(b > 0.0) || !(k > 0.0)) throw ValidationError("prior constants a, b, k must be positive");
    }
};

// F_j: product of R or 1 - R along the root-to-leaf path.
inline Eigen::VectorXd split_fractions(const MRHTree& tree)
{
    const int J = tree.bins();
    Eigen::VectorXd f = Eigen::VectorXd::Ones(J);
    for (int j = 0; j < J; ++j)
        for (int m = 1; m <= tree.M; ++m) {
            const int node = j >> (tree.M - m + 1);
            const bool right = ((j >> (tree.M - m)) & 1) != 0;
            const double r = tree.R[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(node)];
            f(j) *= right ? 1.0 - r : r;
        }
    return f;
}

inline Eigen::VectorXd hazard_increments(const MRHTree& tree)
{
    tree.validate();
    return tree.H * split_fractions(tree);
}

// Cumulative hazard at the end of each bin, pooling groups: sum of D_l / N_l.
struct NelsonAalen {
    Eigen::VectorXd cumulative;
    std::vector<std::string> warnings;

    double total() const { return cumulative.size() ? cumulative(cumulative.size() - 1) : 0.0; }
};

inline NelsonAalen nelson_aalen(const BinnedCohort& cohort)
{
    NelsonAalen na;
    na.cumulative = Eigen::VectorXd::Zero(cohort.bins());
    double running = 0.0;
    for (int j = 0; j < cohort.bins(); ++j) {
        const auto events = static_cast<double>(cohort.failures.col(j).sum());
        const auto at_risk = static_cast<double>(cohort.at_risk.col(j).sum());
        if (at_risk > 0.0)
            running += events / at_risk;
        else
            na.warnings.push_back("bin " + std::to_string(j + 1) + " has nobody at risk; increment set to zero");
        na.cumulative(j) = running;
    }
    return na;
}

enum class SweepOrder { Standard, Reversed };

struct MCMCConfig {
    int iterations = 5000;
    int burn_in = 500;
    int thin = 10;
    std::uint64_t seed = 1;

    // Proposals. R and gamma: Beta(c x, c (1 - x)); effects: normal steps;
    // b and k: log-scale normal steps; a: +-1.
    double r_concentration = 200.0;
    double gamma_concentration = 50.0;
    double effect_step = 0.05;
    double b_log_step = 0.5;
    double k_log_step = 0.5;
    bool adapt = true;
    int adapt_interval = 50;
    double target_acceptance = 0.35;

    // Hyperpriors: a ~ zero-truncated Poisson(mu_a), b ~ Exp(mean mu_b),
    // k ~ Exp(mean mu_k), gamma ~ Beta(u, w); effects ~ N(0, sigma^2).
    double mu_a = 1.0;
    double mu_b = 1.0;
    double mu_k = 1.0;
    double u = 1.0;
    double w = 1.0;
    double sigma_beta = 10.0;
    double sigma_alpha = 10.0;

    // Starting (or fixed) values.
    double initial_H = 0.0;  // <= 0: prior mean a * b
    int a = 1;
    double b = 1.0;
    double k = 1.0;
    double gamma = 0.5;

    bool sample_a = true;
    bool sample_b = true;
    bool sample_k = true;
    bool sample_gamma = false;

    SweepOrder order = SweepOrder::Standard;

    void validate() const
    {
        if (iterations <= burn_in) throw ConfigError("iterations must exceed burn_in");
        if (burn_in < 0) throw ConfigError("burn_in must be nonnegative");
        if (thin < 1) throw ConfigError("thin must be at least 1");
        if (!(r_concentration > 0.0 && gamma_concentration > 0.0 && effect_step > 0.0 && b_log_step > 0.0 &&
              k_log_step > 0.0))
            throw ConfigError("proposal scales must be positive");
        if (adapt_interval < 1) throw ConfigError("adapt_interval must be at least 1");
        if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw ConfigError("target_acceptance must be in (0, 1)");
        if (!(mu_a > 0.0 && mu_b > 0.0 && mu_k > 0.0 && u > 0.0 && w > 0.0))
            throw ConfigError("hyperprior constants must be positive");
        if (!(sigma_beta >= 0.0 && sigma_alpha >= 0.0)) throw ConfigError("effect prior SDs must be nonnegative");
        if (a < 1 || !(b > 0.0) || !(k > 0.0)) throw ConfigError("a must be a positive integer; b and k positive");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    }
};

// Priors centred on the pooled Nelson-Aalen seasonal cumulative hazard: the
// expected value of a * b under the hyperpriors equals that estimate.
inline MCMCConfig default_mcmc_config(const BinnedCohort& cohort)
{
    MCMCConfig c;
    const double h = nelson_aalen(cohort).total();
    if (h > 0.0) {
        const double mean_a = c.mu_a / (1.0 - std::exp(-c.mu_a));
        c.mu_b = h / mean_a;
        c.b = h;
        c.initial_H = h;
    }
    return c;
}

struct MRHDraw {
    int iteration = 0;
    double H = 0.0;
    std::vector<double> R;  // level order
    Eigen::VectorXd beta;
    Eigen::VectorXd alpha;
    int a = 1;
    double b = 0.0;
    double k = 0.0;
    std::vector<double> gamma;  // level order
    Eigen::VectorXd d;
};

struct PosteriorChain {
    int depth = 1;
    std::vector<std::string> fixed_names;
    std::vector<std::string> varying_names;
    std::vector<MRHDraw> draws;
    int iterations = 0;
    int burn_in = 0;
    int thin = 1;
    std::uint64_t seed = 0;
    // Post-burn-in acceptance per block: H, R, beta, alpha, a, b, k, gamma.
    std::vector<std::pair<std::string, double>> acceptance_rates;
    std::vector<std::pair<std::string, double>> final_scales;
};

namespace detail {

inline std::vector<double> flatten(const std::vector<std::vector<double>>& levels)
{
    std::vector<double> out;
    for (auto const& l : levels) out.insert(out.end(), l.begin(), l.end());
    return out;
}

inline double log_beta_density(double x, double a, double b)
{
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

template <class Rng>
double draw_gamma(Rng& rng, double shape, double scale)
{
    return std::gamma_distribution<double>(shape, scale)(rng);
}

template <class Rng>
double draw_beta(Rng& rng, double a, double b)
{
    const double x = draw_gamma(rng, a, 1.0);
    const double y = draw_gamma(rng, b, 1.0);
    return x / (x + y);
}

struct Counter {
    long accepted = 0;
    long proposed = 0;
    long window_accepted = 0;
    long window_proposed = 0;

    void record(bool ok, bool post_burn)
    {
        window_accepted += ok;
        ++window_proposed;
        if (post_burn) {
            accepted += ok;
            ++proposed;
        }
    }
    double window_rate() const { return window_proposed ? static_cast<double>(window_accepted) / window_proposed : -1.0; }
    double rate() const { return proposed ? static_cast<double>(accepted) / proposed : std::nan(""); }
    void reset_window() { window_accepted = window_proposed = 0; }
};

}  // namespace detail

// Mutable sampler state over a read-only cohort.
class MRHSampler {
public:
    MRHSampler(const BinnedCohort& cohort, const MCMCConfig& config) : cohort_(cohort), config_(config), rng_(config.seed)
    {
        config_.validate();
        cohort_.validate();
        if (!cohort_.grid.is_dyadic())
            throw ConfigError("multi-resolution hazard needs a power-of-two bin count, got " + std::to_string(cohort_.bins()));
        const int J = cohort_.bins();
        tree_ = MRHTree::uniform(cohort_.grid.depth());
        tree_.a = config_.a;
        tree_.b = config_.b;
        tree_.k = config_.k;
        for (auto& level : tree_.gamma) std::fill(level.begin(), level.end(), config_.gamma);
        for (int m = 0; m < tree_.M; ++m)
            for (auto& r : tree_.R[static_cast<std::size_t>(m)]) r = config_.gamma;
        tree_.H = config_.initial_H > 0.0 ? config_.initial_H : config_.a * config_.b;

        phi_ = compute_exposures(cohort_).phi;
        events_ = Eigen::VectorXd::Zero(J);
        for (int j = 0; j < J; ++j) events_(j) = static_cast<double>(cohort_.failures.col(j).sum());
        beta_ = Eigen::VectorXd::Zero(cohort_.p());
        alpha_ = Eigen::VectorXd::Zero(cohort_.q());
        eta_ = Eigen::MatrixXd::Zero(cohort_.groups(), J);
        refresh_exposure();
        fractions_ = split_fractions(tree_);

        r_scale_ = config_.r_concentration;
        gamma_scale_ = config_.gamma_concentration;
        beta_step_.assign(static_cast<std::size_t>(cohort_.p()), config_.effect_step);
        alpha_step_.assign(static_cast<std::size_t>(cohort_.q()), config_.effect_step);
        b_step_ = config_.b_log_step;
        k_step_ = config_.k_log_step;
    }

    const MRHTree& tree() const { return tree_; }
    MRHTree& tree() { return tree_; }
    const Eigen::VectorXd& beta() const { return beta_; }
    const Eigen::VectorXd& alpha() const { return alpha_; }

    void set_effects(const Eigen::VectorXd& beta, const Eigen::VectorXd& alpha)
    {
        if (beta.size() != cohort_.p() || alpha.size() != cohort_.q()) throw ValidationError("effect dimensions do not match");
        beta_ = beta;
        alpha_ = alpha;
        for (int i = 0; i < cohort_.groups(); ++i)
            for (int j = 0; j < cohort_.bins(); ++j)
                eta_(i, j) = cohort_.linear_predictor(i, j, detail::as_span(beta_), detail::as_span(alpha_));
        refresh_exposure();
    }

    // Conjugate draw: Gamma(a + sum Delta, rate 1/b + sum_j F_j E_j).
    void gibbs_step_H()
    {
        fractions_ = split_fractions(tree_);
        const double shape = tree_.a + events_.sum();
        const double rate = 1.0 / tree_.b + fractions_.dot(exposure_);
        if (!(rate > 0.0) || !std::isfinite(rate)) fail("nonpositive rate in the H full conditional");
        tree_.H = detail::draw_gamma(rng_, shape, 1.0 / rate);
        if (!(tree_.H > 0.0)) tree_.H = std::numeric_limits<double>::min();
        h_counter_.record(true, post_burn_);
    }

    bool mh_step_R(int m, int p)
    {
        auto& r = tree_.R[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(p)];
        const double c = r_scale_;
        const double proposal = detail::draw_beta(rng_, c * r, c * (1.0 - r));
        bool ok = false;
        if (proposal > 0.0 && proposal < 1.0) {
            const double current = r;
            const double before = log_target_R(m, p);
            r = proposal;
            const double after = log_target_R(m, p);
            const double log_ratio = after - before + detail::log_beta_density(current, c * proposal, c * (1.0 - proposal)) -
                                     detail::log_beta_density(proposal, c * current, c * (1.0 - current));
            ok = accept(log_ratio);
            if (!ok) r = current;
        }
        r_counter_.record(ok, post_burn_);
        return ok;
    }

    // Random-walk update of one effect component; varying = false for beta.
    bool mh_step_effect(bool varying, int s)
    {
        auto& coef = varying ? alpha_ : beta_;
        auto& steps = varying ? alpha_step_ : beta_step_;
        const double sigma = varying ? config_.sigma_alpha : config_.sigma_beta;
        auto& counter = varying ? alpha_counter_ : beta_counter_;
        if (sigma == 0.0) {
            set_component(varying, s, 0.0);
            counter.record(false, post_burn_);
            return false;
        }
        const double current = coef(s);
        const double proposal = current + steps[static_cast<std::size_t>(s)] * normal_(rng_);
        const double before = log_target_effects() - 0.5 * current * current / (sigma * sigma);
        set_component(varying, s, proposal);
        const double after = log_target_effects() - 0.5 * proposal * proposal / (sigma * sigma);
        const bool ok = accept(after - before);
        if (!ok) set_component(varying, s, current);
        counter.record(ok, post_burn_);
        return ok;
    }

    void hyper_steps()
    {
        if (config_.sample_a) step_a();
        if (config_.sample_b) step_b();
        if (config_.sample_k) step_k();
        if (config_.sample_gamma)
            for (int m = 1; m <= tree_.M; ++m)
                for (int p = 0; p < (1 << (m - 1)); ++p) step_gamma(m, p);
    }

    void sweep()
    {
        std::vector<std::pair<int, int>> nodes;
        for (int m = 1; m <= tree_.M; ++m)
            for (int p = 0; p < (1 << (m - 1)); ++p) nodes.emplace_back(m, p);
        if (config_.order == SweepOrder::Standard) {
            gibbs_step_H();
            for (auto [m, p] : nodes) mh_step_R(m, p);
            for (int s = 0; s < cohort_.p(); ++s) mh_step_effect(false, s);
            for (int s = 0; s < cohort_.q(); ++s) mh_step_effect(true, s);
            hyper_steps();
        } else {
            hyper_steps();
            for (int s = cohort_.q() - 1; s >= 0; --s) mh_step_effect(true, s);
            for (int s = cohort_.p() - 1; s >= 0; --s) mh_step_effect(false, s);
            for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) mh_step_R(it->first, it->second);
            gibbs_step_H();
        }
        fractions_ = split_fractions(tree_);
        check_state();
    }

    void set_post_burn(bool v) { post_burn_ = v; }

    void adapt()
    {
        auto factor = [&](const detail::Counter& c) {
            const double rate = c.window_rate();
            return rate < 0.0 ? 1.0 : std::exp(2.0 * (rate - config_.target_acceptance));
        };
        // Beta concentrations shrink the step as they grow.
        r_scale_ = std::clamp(r_scale_ / factor(r_counter_), 1.0, 1e9);
        gamma_scale_ = std::clamp(gamma_scale_ / factor(gamma_counter_), 1.0, 1e9);
        for (auto& s : beta_step_) s = std::clamp(s * factor(beta_counter_), 1e-8, 1e3);
        for (auto& s : alpha_step_) s = std::clamp(s * factor(alpha_counter_), 1e-8, 1e3);
        b_step_ = std::clamp(b_step_ * factor(b_counter_), 1e-6, 10.0);
        k_step_ = std::clamp(k_step_ * factor(k_counter_), 1e-6, 10.0);
        for (auto* c : counters()) c->reset_window();
    }

    MRHDraw snapshot(int iteration) const
    {
        MRHDraw d;
        d.iteration = iteration;
        d.H = tree_.H;
        d.R = detail::flatten(tree_.R);
        d.beta = beta_;
        d.alpha = alpha_;
        d.a = tree_.a;
        d.b = tree_.b;
        d.k = tree_.k;
        d.gamma = detail::flatten(tree_.gamma);
        d.d = tree_.H * split_fractions(tree_);
        return d;
    }

    std::vector<std::pair<std::string, double>> acceptance_rates() const
    {
        return {{"H", h_counter_.rate()},         {"R", r_counter_.rate()},     {"beta", beta_counter_.rate()},
                {"alpha", alpha_counter_.rate()}, {"a", a_counter_.rate()},     {"b", b_counter_.rate()},
                {"k", k_counter_.rate()},         {"gamma", gamma_counter_.rate()}};
    }

    std::vector<std::pair<std::string, double>> scales() const
    {
        std::vector<std::pair<std::string, double>> out{{"r_concentration", r_scale_},
                                                        {"gamma_concentration", gamma_scale_},
                                                        {"b_log_step", b_step_},
                                                        {"k_log_step", k_step_}};
        for (std::size_t s = 0; s < beta_step_.size(); ++s) out.emplace_back("beta_step_" + std::to_string(s + 1), beta_step_[s]);
        for (std::size_t s = 0; s < alpha_step_.size(); ++s) out.emplace_back("alpha_step_" + std::to_string(s + 1), alpha_step_[s]);
        return out;
    }

private:
    // E_j = sum_i exp(eta_ij) Phi_ij.
    void refresh_exposure() { exposure_ = (eta_.array().exp() * phi_.array()).colwise().sum().transpose(); }

    void set_component(bool varying, int s, double value)
    {
        auto& coef = varying ? alpha_ : beta_;
        const double delta = value - coef(s);
        coef(s) = value;
        if (delta == 0.0) return;
        if (varying)
            eta_ += delta * cohort_.varying_covariates[static_cast<std::size_t>(s)];
        else
            eta_.colwise() += delta * cohort_.fixed_covariates.col(s);
        refresh_exposure();
    }

    // Data term as a function of the increments: sum_j D_j log d_j - d_j E_j.
    double log_likelihood_d(const Eigen::VectorXd& d) const
    {
        double ll = 0.0;
        for (Eigen::Index j = 0; j < d.size(); ++j) {
            if (events_(j) > 0.0) {
                if (!(d(j) > 0.0)) return -std::numeric_limits<double>::infinity();
                ll += events_(j) * std::log(d(j));
            }
            ll -= d(j) * exposure_(j);
        }
        return ll;
    }

    double log_prior_R(int m, int p) const
    {
        const double r = tree_.R[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(p)];
        const double g = tree_.gamma[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(p)];
        const double conc = 2.0 * std::pow(tree_.k, m) * tree_.a;
        return detail::log_beta_density(r, conc * g, conc * (1.0 - g));
    }

    double log_target_R(int m, int p) const
    {
        return log_prior_R(m, p) + log_likelihood_d(tree_.H * split_fractions(tree_));
    }

    // sum_ij Delta_ij eta_ij - d_j exp(eta_ij) Phi_ij.
    double log_target_effects() const
    {
        double ll = 0.0;
        for (int i = 0; i < cohort_.groups(); ++i)
            for (int j = 0; j < cohort_.bins(); ++j)
                ll += static_cast<double>(cohort_.failures(i, j)) * eta_(i, j);
        return ll - tree_.H * split_fractions(tree_).dot(exposure_);
    }

    double log_prior_tree() const
    {
        double s = 0.0;
        for (int m = 1; m <= tree_.M; ++m)
            for (int p = 0; p < (1 << (m - 1)); ++p) s += log_prior_R(m, p);
        return s;
    }

    // log Gamma(H | a, scale b).
    double log_prior_H() const
    {
        return (tree_.a - 1.0) * std::log(tree_.H) - tree_.H / tree_.b - std::lgamma(static_cast<double>(tree_.a)) -
               tree_.a * std::log(tree_.b);
    }

    void step_a()
    {
        const int current = tree_.a;
        const int proposal = current + (unit_(rng_) < 0.5 ? -1 : 1);
        bool ok = false;
        if (proposal >= 1) {
            auto log_target = [&] {
                return tree_.a * std::log(config_.mu_a) - std::lgamma(tree_.a + 1.0) + log_prior_H() + log_prior_tree();
            };
            const double before = log_target();
            tree_.a = proposal;
            const double after = log_target();
            ok = accept(after - before);
            if (!ok) tree_.a = current;
        }
        a_counter_.record(ok, post_burn_);
    }

    void step_b()
    {
        const double current = tree_.b;
        const double proposal = current * std::exp(b_step_ * normal_(rng_));
        auto log_target = [&](double b) { return -tree_.a * std::log(b) - tree_.H / b - b / config_.mu_b; };
        // log(b'/b) is the Jacobian of the log-scale walk.
        const bool ok = accept(log_target(proposal) - log_target(current) + std::log(proposal / current));
        if (ok) tree_.b = proposal;
        b_counter_.record(ok, post_burn_);
    }

    void step_k()
    {
        const double current = tree_.k;
        const double proposal = current * std::exp(k_step_ * normal_(rng_));
        const double before = log_prior_tree() - current / config_.mu_k;
        tree_.k = proposal;
        const double after = log_prior_tree() - proposal / config_.mu_k;
        const bool ok = std::isfinite(after) && accept(after - before + std::log(proposal / current));
        if (!ok) tree_.k = current;
        k_counter_.record(ok, post_burn_);
    }

    void step_gamma(int m, int p)
    {
        auto& g = tree_.gamma[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(p)];
        const double c = gamma_scale_;
        const double proposal = detail::draw_beta(rng_, c * g, c * (1.0 - g));
        bool ok = false;
        if (proposal > 0.0 && proposal < 1.0) {
            const double current = g;
            auto log_target = [&] {
                return log_prior_R(m, p) + (config_.u - 1.0) * std::log(g) + (config_.w - 1.0) * std::log1p(-g);
            };
            const double before = log_target();
            g = proposal;
            const double after = log_target();
            const double log_ratio = after - before + detail::log_beta_density(current, c * proposal, c * (1.0 - proposal)) -
                                     detail::log_beta_density(proposal, c * current, c * (1.0 - current));
            ok = std::isfinite(after) && accept(log_ratio);
            if (!ok) g = current;
        }
        gamma_counter_.record(ok, post_burn_);
    }

    bool accept(double log_ratio)
    {
        if (std::isnan(log_ratio)) return false;
        return log_ratio >= 0.0 || std::log(unit_(rng_)) < log_ratio;
    }

    std::vector<detail::Counter*> counters()
    {
        return {&h_counter_, &r_counter_, &beta_counter_, &alpha_counter_, &a_counter_, &b_counter_, &k_counter_, &gamma_counter_};
    }

    void check_state() const
    {
        const char* problem = nullptr;
        if (!(tree_.H > 0.0) || !std::isfinite(tree_.H)) problem = "H left (0, inf)";
        for (auto const& level : tree_.R)
            for (double r : level)
                if (!(r > 0.0 && r < 1.0)) problem = "a split parameter left (0, 1)";
        if (!problem && std::abs(fractions_.sum() - 1.0) > 1e-12) problem = "split fractions no longer sum to one";
        if (!problem && !(beta_.allFinite() && alpha_.allFinite())) problem = "non-finite covariate effect";
        if (problem) fail(problem);
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        std::ostringstream os;
        os.precision(17);
        os << "MRH chain aborted: " << what << "; last state H=" << tree_.H << " a=" << tree_.a << " b=" << tree_.b
           << " k=" << tree_.k << " R=[";
        for (double r : detail::flatten(tree_.R)) os << r << ' ';
        os << "] beta=[" << beta_.transpose() << "] alpha=[" << alpha_.transpose() << "]";
        throw InternalError(os.str());
    }

    const BinnedCohort& cohort_;
    MCMCConfig config_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};

    MRHTree tree_;
    Eigen::MatrixXd phi_;
    Eigen::MatrixXd eta_;
    Eigen::VectorXd events_;
    Eigen::VectorXd exposure_;
    Eigen::VectorXd fractions_;
    Eigen::VectorXd beta_;
    Eigen::VectorXd alpha_;
    bool post_burn_ = false;

    double r_scale_ = 0.0;
    double gamma_scale_ = 0.0;
    std::vector<double> beta_step_;
    std::vector<double> alpha_step_;
    double b_step_ = 0.0;
    double k_step_ = 0.0;
    detail::Counter h_counter_, r_counter_, beta_counter_, alpha_counter_, a_counter_, b_counter_, k_counter_, gamma_counter_;
};

inline PosteriorChain run_chain(const BinnedCohort& cohort, const MCMCConfig& config)
{
    MRHSampler sampler(cohort, config);
    PosteriorChain chain;
    chain.depth = cohort.grid.depth();
    chain.fixed_names = cohort.fixed_names;
    chain.varying_names = cohort.varying_names;
    chain.iterations = config.iterations;
    chain.burn_in = config.burn_in;
    chain.thin = config.thin;
    chain.seed = config.seed;
    chain.draws.reserve(static_cast<std::size_t>((config.iterations - config.burn_in) / config.thin));
    for (int t = 1; t <= config.iterations; ++t) {
        sampler.set_post_burn(t > config.burn_in);
        sampler.sweep();
        if (t <= config.burn_in && config.adapt && t % config.adapt_interval == 0) sampler.adapt();
        if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) chain.draws.push_back(sampler.snapshot(t));
    }
    chain.acceptance_rates = sampler.acceptance_rates();
    chain.final_scales = sampler.scales();
    return chain;
}

struct PosteriorSummary {
    HazardEstimate estimate;
    std::vector<std::pair<std::string, double>> effective_sample_size;
    bool few_draws = false;
};

inline constexpr std::size_t kMinimumRetainedDraws = 100;

// Medians and equal-tail intervals; the `_linear` interval is mean +- z sd.
inline PosteriorSummary summarize_posterior(const PosteriorChain& chain, const BinGrid& grid, double level = 0.95)
{
    if (chain.draws.empty()) throw ValidationError("posterior chain has no retained draws");
    if (grid.bins != (1 << chain.depth)) throw ValidationError("grid does not match the chain's tree depth");
    const double z = stats::normal_critical(level);
    const double lo = 0.5 * (1.0 - level);
    const double hi = 1.0 - lo;
    PosteriorSummary out;
    out.few_draws = chain.draws.size() < kMinimumRetainedDraws;
    auto& est = out.estimate;
    est.method = "mrh";
    est.grid = grid;
    est.level = level;

    auto column = [&](auto&& get) {
        std::vector<double> v;
        v.reserve(chain.draws.size());
        for (auto const& d : chain.draws) v.push_back(get(d));
        return v;
    };
    for (int j = 0; j < grid.bins; ++j) {
        const auto v = column([&](const MRHDraw& d) { return d.d(j) / grid.width; });
        const double m = stats::mean(v);
        const double s = stats::sd(v);
        est.bins.push_back({stats::quantile(v, 0.5), stats::quantile(v, lo), stats::quantile(v, hi), m - z * s, m + z * s, false});
        out.effective_sample_size.emplace_back("d_" + std::to_string(j + 1), stats::effective_sample_size(v));
    }
    auto effect = [&](const std::string& name, auto&& get) {
        const auto v = column(get);
        out.effective_sample_size.emplace_back(name, stats::effective_sample_size(v));
        return EffectSummary{name, stats::quantile(v, 0.5), stats::sd(v), stats::quantile(v, lo), stats::quantile(v, hi)};
    };
    for (std::size_t s = 0; s < chain.fixed_names.size(); ++s)
        est.fixed_effects.push_back(effect(chain.fixed_names[s], [&](const MRHDraw& d) { return d.beta(static_cast<Eigen::Index>(s)); }));
    for (std::size_t s = 0; s < chain.varying_names.size(); ++s)
        est.varying_effects.push_back(
            effect(chain.varying_names[s], [&](const MRHDraw& d) { return d.alpha(static_cast<Eigen::Index>(s)); }));
    out.effective_sample_size.emplace_back("H", stats::effective_sample_size(column([](const MRHDraw& d) { return d.H; })));
    if (out.few_draws)
        est.warnings.push_back("only " + std::to_string(chain.draws.size()) + " retained draws; summaries are unreliable");
    return out;
}

}  // namespace pehaz
