#pragma once

// Grouped survival data on a seasonal bin grid, and the ingestion transforms
// that turn monthly records into that shape.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/errors.hpp"
#include "pehaz/smoothing_spline.hpp"

namespace pehaz {

inline constexpr double kSeasonMonths = 12.0;

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using Series = std::vector<std::optional<double>>;

// Calendar months are encoded as year * 12 + (month - 1).
inline int month_id(int year, int month) { return year * 12 + (month - 1); }
inline int calendar_year(int id) { return id / 12; }
inline int calendar_month(int id) { return id % 12 + 1; }

inline std::string month_label(int id)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", calendar_year(id), calendar_month(id));
    return buf;
}

struct BinGrid {
    int bins = 12;
    double width = 1.0;  // months
    int season_start_month = 7;

    static BinGrid make(int bins, int season_start_month = 7)
    {
        if (bins < 2) throw ConfigError("bin grid needs at least 2 bins per season, got " + std::to_string(bins));
        if (season_start_month < 1 || season_start_month > 12)
            throw ConfigError("season start month must be in 1..12");
        return BinGrid{bins, kSeasonMonths / bins, season_start_month};
    }

    double start(int j) const { return j * width; }
    double end(int j) const { return (j + 1) * width; }
    double midpoint(int j) const { return (j + 0.5) * width; }

    bool is_dyadic() const { return bins >= 2 && (bins & (bins - 1)) == 0; }

    // Tree depth M with bins == 2^M.
    int depth() const
    {
        if (!is_dyadic()) throw ConfigError("bin count " + std::to_string(bins) + " is not a power of two");
        int m = 0;
        while ((1 << m) < bins) ++m;
        return m;
    }

    bool month_aligned() const { return bins == 12; }
};

enum class TauRule { MidBin, EndOfBin };

struct CovariateTransform {
    std::string name;
    double center = 0.0;
    double scale = 1.0;
};

struct BinnedCohort {
    BinGrid grid;
    std::vector<std::string> group_labels;
    CountMatrix failures;          // Delta[i][j]
    CountMatrix censored;          // Gamma[i][j]
    CountMatrix at_risk;           // N[i][j], at bin start
    Eigen::MatrixXd occupancy;     // tau[i][j], months, mean time in bin of exiting subjects
    Eigen::MatrixXd fixed_covariates;               // X, groups x p
    std::vector<std::string> fixed_names;
    std::vector<Eigen::MatrixXd> varying_covariates;  // Z, one groups x bins matrix per covariate
    std::vector<std::string> varying_names;
    std::vector<CovariateTransform> transforms;       // applied to varying covariates, if any

    int groups() const { return static_cast<int>(failures.rows()); }
    int bins() const { return grid.bins; }
    int p() const { return static_cast<int>(fixed_covariates.cols()); }
    int q() const { return static_cast<int>(varying_covariates.size()); }

    std::int64_t total_failures() const { return failures.sum(); }

    // X_i'beta + Z_ij'alpha.
    double linear_predictor(int i, int j, std::span<const double> beta, std::span<const double> alpha) const
    {
        double eta = 0.0;
        for (int s = 0; s < p(); ++s) eta += fixed_covariates(i, s) * beta[static_cast<std::size_t>(s)];
        for (int s = 0; s < q(); ++s)
            eta += varying_covariates[static_cast<std::size_t>(s)](i, j) * alpha[static_cast<std::size_t>(s)];
        return eta;
    }

    // Implied new entrants joining at the start of bin j + 1 (column 0 is zero).
    CountMatrix entrants() const
    {
        CountMatrix e = CountMatrix::Zero(groups(), bins());
        for (int i = 0; i < groups(); ++i)
            for (int j = 0; j + 1 < bins(); ++j)
                e(i, j + 1) = at_risk(i, j + 1) - (at_risk(i, j) - failures(i, j) - censored(i, j));
        return e;
    }

    void validate() const
    {
        const auto n = failures.rows();
        const auto J = static_cast<Eigen::Index>(grid.bins);
        auto shape_ok = [&](auto const& m) { return m.rows() == n && m.cols() == J; };
        if (!shape_ok(failures) || !shape_ok(censored) || !shape_ok(at_risk) || !shape_ok(occupancy))
            throw ValidationError("cohort tables must all be groups x bins");
        if (fixed_covariates.rows() != n && fixed_covariates.size() != 0)
            throw ValidationError("fixed covariate rows must match group count");
        if (fixed_names.size() != static_cast<std::size_t>(fixed_covariates.cols()))
            throw ValidationError("fixed covariate names do not match columns");
        if (varying_names.size() != varying_covariates.size())
            throw ValidationError("time-varying covariate names do not match tables");
        for (auto const& z : varying_covariates)
            if (!shape_ok(z)) throw ValidationError("time-varying covariate tables must be groups x bins");
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < J; ++j) {
                const auto where = " at group " + std::to_string(i) + ", bin " + std::to_string(j);
                if (failures(i, j) < 0 || censored(i, j) < 0 || at_risk(i, j) < 0)
                    throw ValidationError("negative count" + where);
                if (failures(i, j) + censored(i, j) > at_risk(i, j))
                    throw ValidationError("failures plus censored exceed at-risk count" + where);
                const double tau = occupancy(i, j);
                if (!(tau >= 0.0 && tau <= grid.width * (1.0 + 1e-12)))
                    throw ValidationError("occupancy time outside [0, bin width]" + where);
                if (j + 1 < J && at_risk(i, j + 1) < at_risk(i, j) - failures(i, j) - censored(i, j))
                    throw ValidationError("at-risk accounting implies negative entrants" + where);
            }
        }
    }
};

struct PopulationAnchor {
    double month = 0.0;  // month id, may be fractional
    double population = 0.0;
};

struct RawMonthlySeries {
    int first_month = 0;
    std::vector<std::int64_t> event_counts;
    std::vector<std::pair<std::string, Series>> covariates;
    std::vector<PopulationAnchor> population_anchors;

    int size() const { return static_cast<int>(event_counts.size()); }
    int last_month() const { return first_month + size() - 1; }

    const Series& covariate(std::string_view name) const
    {
        for (auto const& [n, s] : covariates)
            if (n == name) return s;
        throw ConfigError("unknown covariate column '" + std::string(name) + "'");
    }

    void validate() const
    {
        for (auto const& [name, s] : covariates)
            if (s.size() != event_counts.size())
                throw ValidationError("covariate '" + name + "' length does not match the event series");
        for (int t = 0; t < size(); ++t)
            if (event_counts[static_cast<std::size_t>(t)] < 0)
                throw ValidationError("negative event count in " + month_label(first_month + t));
    }
};

namespace detail {

inline void check_anchors(std::span<const PopulationAnchor> anchors)
{
    if (anchors.size() < 2) throw ConfigError("population interpolation needs at least 2 anchors");
    for (std::size_t k = 0; k + 1 < anchors.size(); ++k)
        if (!(anchors[k + 1].month > anchors[k].month))
            throw ValidationError("population anchor months must be strictly increasing");
}

}  // namespace detail

// Linear interpolation between anchors at a (possibly fractional) month id.
inline double population_at(std::span<const PopulationAnchor> anchors, double month, bool allow_extrapolation = false)
{
    detail::check_anchors(anchors);
    if (!allow_extrapolation && (month < anchors.front().month || month > anchors.back().month))
        throw ValidationError("month " + std::to_string(month) + " lies outside the population anchor range");
    std::size_t k = 0;
    while (k + 2 < anchors.size() && month > anchors[k + 1].month) ++k;
    auto const& lo = anchors[k];
    auto const& hi = anchors[k + 1];
    const double w = (month - lo.month) / (hi.month - lo.month);
    return lo.population + w * (hi.population - lo.population);
}

// Per-month at-risk counts for month ids [first, last], rounded to nearest.
inline std::vector<std::int64_t> interpolate_population(std::span<const PopulationAnchor> anchors, int first, int last,
                                                        bool allow_extrapolation = false)
{
    detail::check_anchors(anchors);
    std::vector<std::int64_t> out;
    for (int m = first; m <= last; ++m) out.push_back(std::llround(population_at(anchors, m, allow_extrapolation)));
    return out;
}

// output[t] = input[t - lag]; the first `lag` entries are unavailable.
inline Series lag_covariate(const Series& series, int lag)
{
    if (lag < 0) throw ValidationError("lag must be nonnegative");
    if (static_cast<std::size_t>(lag) >= series.size() && !(lag == 0 && series.empty()))
        throw ValidationError("lag " + std::to_string(lag) + " is not shorter than the series");
    Series out(series.size());
    for (std::size_t t = static_cast<std::size_t>(lag); t < series.size(); ++t) out[t] = series[t - lag];
    return out;
}

// Resamples consecutive whole seasons of monthly values onto bin midpoints.
// Month m is placed at m + 0.5; a smoothing spline is fitted through all months
// and evaluated at each bin midpoint. A 12-bin grid coincides with months and
// passes values through unchanged.
inline std::vector<double> resample_covariate_to_bins(std::span<const double> monthly, const BinGrid& grid)
{
    if (monthly.size() < 12) throw ValidationError("covariate series is shorter than one season");
    const std::size_t seasons = monthly.size() / 12;
    std::vector<double> out;
    out.reserve(seasons * static_cast<std::size_t>(grid.bins));
    if (grid.month_aligned()) {
        out.assign(monthly.begin(), monthly.begin() + static_cast<std::ptrdiff_t>(seasons * 12));
        return out;
    }
    std::vector<double> x(monthly.size());
    for (std::size_t m = 0; m < x.size(); ++m) x[m] = static_cast<double>(m) + 0.5;
    const auto spline = SmoothingSpline::fit_gcv(x, monthly);
    for (std::size_t s = 0; s < seasons; ++s)
        for (int j = 0; j < grid.bins; ++j) out.push_back(spline(12.0 * static_cast<double>(s) + grid.midpoint(j)));
    return out;
}

// Splits one month's integer count across the bins it overlaps, proportionally
// to overlap length, preserving the total (largest remainder, ties to lower bin).
inline void apportion_month(std::int64_t count, int month_in_season, const BinGrid& grid,
                            std::span<std::int64_t> bin_counts)
{
    const double lo = month_in_season;
    const double hi = month_in_season + 1.0;
    std::vector<std::pair<int, double>> shares;
    for (int j = 0; j < grid.bins; ++j) {
        const double overlap = std::min(hi, grid.end(j)) - std::max(lo, grid.start(j));
        if (overlap > 1e-12) shares.emplace_back(j, overlap * static_cast<double>(count));
    }
    std::int64_t assigned = 0;
    std::vector<std::pair<double, int>> remainders;
    for (auto const& [j, share] : shares) {
        const auto whole = static_cast<std::int64_t>(std::floor(share + 1e-9));
        bin_counts[static_cast<std::size_t>(j)] += whole;
        assigned += whole;
        remainders.emplace_back(share - static_cast<double>(whole), j);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](auto const& a, auto const& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < count; ++k, ++assigned)
        bin_counts[static_cast<std::size_t>(remainders[k % remainders.size()].second)] += 1;
}

struct CovariateSelection {
    std::string column;
    int lag = 0;
    std::string name;  // defaults to column (with lag suffix)
};

struct CohortOptions {
    std::vector<CovariateSelection> covariates;
    TauRule tau_rule = TauRule::MidBin;
    bool standardize = true;
    bool allow_population_extrapolation = false;
};

// Centers and scales each time-varying covariate over the whole cohort.
inline void standardize_covariates(BinnedCohort& cohort)
{
    cohort.transforms.clear();
    for (int s = 0; s < cohort.q(); ++s) {
        auto& z = cohort.varying_covariates[static_cast<std::size_t>(s)];
        const double n = static_cast<double>(z.size());
        const double mean = z.mean();
        const double var = n > 1 ? (z.array() - mean).square().sum() / (n - 1.0) : 0.0;
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        z = (z.array() - mean) / sd;
        cohort.transforms.push_back({cohort.varying_names[static_cast<std::size_t>(s)], mean, sd});
    }
}

// Assembles monthly records into one group per complete seasonal year.
//  - Seasons touching months left unavailable by a lag are dropped.
//  - Population decreases are censoring; increases are entrants at bin start.
//  - All survivors of a season are censored at its end (occupancy = full bin).
inline BinnedCohort build_binned_cohort(const RawMonthlySeries& raw, const BinGrid& grid, const CohortOptions& options)
{
    raw.validate();
    int max_lag = 0;
    for (auto const& c : options.covariates) {
        if (c.lag < 0) throw ConfigError("covariate '" + c.column + "' has a negative lag");
        max_lag = std::max(max_lag, c.lag);
    }
    std::vector<Series> lagged;
    for (auto const& c : options.covariates) lagged.push_back(lag_covariate(raw.covariate(c.column), c.lag));

    const int first_usable = raw.first_month + max_lag;
    std::vector<int> season_starts;
    for (int m = first_usable; m + 11 <= raw.last_month(); ++m)
        if (calendar_month(m) == grid.season_start_month) season_starts.push_back(m);
    if (season_starts.empty()) throw ValidationError("input does not cover a complete seasonal year");

    const int n = static_cast<int>(season_starts.size());
    const int J = grid.bins;
    const double w = grid.width;

    BinnedCohort cohort;
    cohort.grid = grid;
    cohort.failures = CountMatrix::Zero(n, J);
    cohort.censored = CountMatrix::Zero(n, J);
    cohort.at_risk = CountMatrix::Zero(n, J);
    cohort.occupancy = Eigen::MatrixXd::Zero(n, J);
    cohort.fixed_covariates = Eigen::MatrixXd::Zero(n, 0);

    for (int i = 0; i < n; ++i) {
        const int s0 = season_starts[static_cast<std::size_t>(i)];
        cohort.group_labels.push_back(month_label(s0));
        std::vector<std::int64_t> bin_events(static_cast<std::size_t>(J), 0);
        for (int m = 0; m < 12; ++m)
            apportion_month(raw.event_counts[static_cast<std::size_t>(s0 - raw.first_month + m)], m, grid, bin_events);
        for (int j = 0; j < J; ++j) {
            cohort.failures(i, j) = bin_events[static_cast<std::size_t>(j)];
            cohort.at_risk(i, j) = std::llround(
                population_at(raw.population_anchors, s0 + grid.start(j), options.allow_population_extrapolation));
        }
        const double tau_rule = options.tau_rule == TauRule::MidBin ? 0.5 * w : w;
        for (int j = 0; j < J; ++j) {
            const auto N = cohort.at_risk(i, j);
            const auto D = cohort.failures(i, j);
            if (D > N)
                throw ValidationError("event count " + std::to_string(D) + " exceeds at-risk count " +
                                      std::to_string(N) + " in season " + cohort.group_labels.back() + ", bin " +
                                      std::to_string(j));
            if (j + 1 < J) {
                cohort.censored(i, j) = std::max<std::int64_t>(0, N - D - cohort.at_risk(i, j + 1));
                cohort.occupancy(i, j) = tau_rule;
            } else {
                const auto G = N - D;
                cohort.censored(i, j) = G;
                cohort.occupancy(i, j) =
                    D + G > 0 ? (static_cast<double>(D) * tau_rule + static_cast<double>(G) * w) / static_cast<double>(D + G)
                              : tau_rule;
            }
        }
    }

    // Covariates: contiguous months from the first to the last kept season.
    const int span_first = season_starts.front();
    const int span_months = 12 * n;
    for (std::size_t c = 0; c < options.covariates.size(); ++c) {
        auto const& sel = options.covariates[c];
        std::vector<double> monthly(static_cast<std::size_t>(span_months));
        for (int t = 0; t < span_months; ++t) {
            auto const& v = lagged[c][static_cast<std::size_t>(span_first - raw.first_month + t)];
            if (!v) throw ValidationError("missing value for covariate '" + sel.column + "' in month " +
                                          month_label(span_first + t - sel.lag));
            monthly[static_cast<std::size_t>(t)] = *v;
        }
        const auto binned = resample_covariate_to_bins(monthly, grid);
        Eigen::MatrixXd z(n, J);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < J; ++j) z(i, j) = binned[static_cast<std::size_t>(i * J + j)];
        cohort.varying_covariates.push_back(std::move(z));
        std::string name = sel.name;
        if (name.empty()) name = sel.lag > 0 ? sel.column + "_lag" + std::to_string(sel.lag) : sel.column;
        cohort.varying_names.push_back(name);
    }
    if (options.standardize) standardize_covariates(cohort);
    cohort.validate();
    return cohort;
}

}  // namespace pehaz
