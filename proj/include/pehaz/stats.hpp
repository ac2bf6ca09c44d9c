#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "pehaz/errors.hpp"

namespace pehaz::stats {

// Two-sided standard normal critical value for a coverage level in (0, 1).
inline double normal_critical(double level)
{
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("coverage level must be in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>{}, 0.5 + 0.5 * level);
}

// Linear-interpolation sample quantile (R type 7).
inline double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
inline double sd(std::span<const double> v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Effective sample size from Geyer's initial positive sequence.
inline double effective_sample_size(std::span<const double> v)
{
    const auto n = v.size();
    if (n < 4) return static_cast<double>(n);
    const double m = mean(v);
    double c0 = 0.0;
    for (double x : v) c0 += (x - m) * (x - m);
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) return static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double c = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) c += (v[t] - m) * (v[t + lag] - m);
        return c / static_cast<double>(n);
    };
    double tau = -1.0;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        const double pair = (k == 0 ? c0 : autocov(2 * k)) + autocov(2 * k + 1);
        if (pair <= 0.0) break;
        tau += 2.0 * pair / c0;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

// splitmix64 step, used to derive independent seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace pehaz::stats
