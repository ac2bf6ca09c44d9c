#pragma once

// Two-bin efficiency comparison between the Poisson GLM rate estimates and the
// MRH increments (unit-width bins, one group, no covariates, mid-bin failures).

#include <cmath>
#include <vector>

#include "pehaz/errors.hpp"

namespace pehaz {

struct TwoBinScenario {
    double H = 0.1;
    double R = 0.5;
    double N1 = 1e4;
    double N2 = 1e4;
    double a = 1.0;
    double k = 1.0;

    double d1() const { return H * R; }
    double d2() const { return H * (1.0 - R); }

    TwoBinScenario mirrored() const { return {H, 1.0 - R, N2, N1, a, k}; }

    void validate() const
    {
        if (!(R > 0.0 && R < 1.0)) throw ValidationError("split R must lie in (0, 1)");
        if (!(H > 0.0 && N1 > 0.0 && N2 > 0.0 && a > 0.0 && k > 0.0))
            throw ValidationError("H, N1, N2, a and k must be positive");
    }
};

struct VariancePair {
    double first = 0.0;
    double second = 0.0;
};

// lambda^2 / (N (1 - exp(-lambda))) for each bin, with its own at-risk count.
inline VariancePair var_glm(const TwoBinScenario& s)
{
    s.validate();
    auto v = [](double lambda, double n) { return lambda * lambda / (n * -std::expm1(-lambda)); };
    return {v(s.d1(), s.N1), v(s.d2(), s.N2)};
}

namespace detail {

// Closed-form Laplace variance of d_1, transcribed term by term.
inline double laplace_var_d1(const TwoBinScenario& s)
{
    const double H = s.H, R = s.R, N1 = s.N1, N2 = s.N2, a = s.a, k = s.k;
    const double d1 = s.d1(), d2 = s.d2();
    const double q = 1.0 - R;
    const double e1 = std::exp(-d1), e2 = std::exp(-d2);

    const double numerator = 1.0 - a * (q * q + k * (1.0 - 2.0 * q * R)) / (q * q) - 2.0 * d1 * N2 +
                             N1 * ((6.0 * R - 4.0 * R * R - 3.0) / (q * q) + e1 * (2.0 + d1) +
                                   e2 * (1.0 + R * R / (q * q) - d1) + 2.0 * d1);

    const double info_R = (a * k - N1 * (e2 - 1.0)) / (q * q) + (a * k - N1 * (e1 - 1.0)) / (R * R);
    const double cross = std::exp(H + d1) * (N1 - N2) - 0.5 * N1 * std::exp(2.0 * d1) + 0.5 * N1 * std::exp(H);
    const double denominator =
        (1.0 - a + N1 * (e2 + e1 - 2.0)) * info_R / (H * H) + std::exp(-2.0 * (H + d1)) * cross * cross;
    return numerator / denominator;
}

}  // namespace detail

// The second component is the mirror image: R -> 1 - R, N1 <-> N2.
inline VariancePair var_mrh_laplace(const TwoBinScenario& s)
{
    s.validate();
    return {detail::laplace_var_d1(s), detail::laplace_var_d1(s.mirrored())};
}

struct GDifference {
    double g1 = 0.0;
    double g2 = 0.0;
};

inline GDifference g_difference(const TwoBinScenario& s)
{
    const auto glm = var_glm(s);
    const auto mrh = var_mrh_laplace(s);
    return {mrh.first - glm.first, mrh.second - glm.second};
}

// Central-difference dg/dH at the scenario's H.
inline GDifference g_slope(TwoBinScenario s, double step = 0.0)
{
    const double h = step > 0.0 ? step : 1e-3 * s.H;
    TwoBinScenario lo = s, hi = s;
    lo.H -= h;
    hi.H += h;
    const auto a = g_difference(lo);
    const auto b = g_difference(hi);
    return {(b.g1 - a.g1) / (2.0 * h), (b.g2 - a.g2) / (2.0 * h)};
}

// n points evenly spaced on the log scale, endpoints included.
inline std::vector<double> log_spaced(double lo, double hi, int n)
{
    if (!(lo > 0.0 && hi > lo) || n < 2) throw ConfigError("log grid needs 0 < lo < hi and at least two points");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1)));
    out.back() = hi;
    return out;
}

struct VarianceCurveRow {
    double R = 0.0;
    double H = 0.0;
    double censor_pct = 0.0;  // 100 exp(-H)
    double g1 = 0.0;
    double g2 = 0.0;
    double var_glm1 = 0.0;
    double var_mrh1 = 0.0;
};

struct VarianceCurveOptions {
    std::vector<double> R_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    double H_min = 1e-4;
    double H_max = 0.30;
    int points = 100;
    double N1 = 1e4;
    double N2 = 1e4;
    double a = 1.0;
    double k = 1.0;
};

inline std::vector<VarianceCurveRow> variance_curves(const VarianceCurveOptions& o)
{
    std::vector<VarianceCurveRow> rows;
    const auto grid = log_spaced(o.H_min, o.H_max, o.points);
    for (double R : o.R_values)
        for (double H : grid) {
            const TwoBinScenario s{H, R, o.N1, o.N2, o.a, o.k};
            const auto glm = var_glm(s);
            const auto mrh = var_mrh_laplace(s);
            rows.push_back({R, H, 100.0 * std::exp(-H), mrh.first - glm.first, mrh.second - glm.second, glm.first, mrh.first});
        }
    return rows;
}

}  // namespace pehaz
