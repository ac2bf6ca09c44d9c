#pragma once

// Natural cubic smoothing spline (Reinsch form) with the smoothing weight
// picked by generalized cross-validation over a log grid.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/errors.hpp"

namespace pehaz {

class SmoothingSpline {
public:
    // Knots must be strictly increasing; at least three points.
    static SmoothingSpline fit_gcv(std::span<const double> x, std::span<const double> y)
    {
        SmoothingSpline s;
        s.setup(x, y);
        const double hbar = (s.x_.back() - s.x_.front()) / static_cast<double>(s.x_.size() - 1);
        const double unit = hbar * hbar * hbar;
        double best = std::numeric_limits<double>::infinity();
        double best_alpha = unit;
        for (int u = 0; u <= 120; ++u) {
            const double alpha = unit * std::pow(10.0, -6.0 + 0.1 * u);
            const double score = s.gcv(alpha);
            if (score < best) {
                best = score;
                best_alpha = alpha;
            }
        }
        s.solve(best_alpha);
        return s;
    }

    static SmoothingSpline fit(std::span<const double> x, std::span<const double> y, double alpha)
    {
        SmoothingSpline s;
        s.setup(x, y);
        s.solve(alpha);
        return s;
    }

    double alpha() const { return alpha_; }
    double gcv_score() const { return gcv_; }

    double operator()(double t) const
    {
        const auto n = x_.size();
        if (t <= x_.front()) {
            const double h = x_[1] - x_[0];
            const double slope = (g_[1] - g_[0]) / h - h * gamma_[1] / 6.0;
            return g_[0] + slope * (t - x_.front());
        }
        if (t >= x_.back()) {
            const double h = x_[n - 1] - x_[n - 2];
            const double slope = (g_[n - 1] - g_[n - 2]) / h + h * gamma_[n - 2] / 6.0;
            return g_[n - 1] + slope * (t - x_.back());
        }
        std::size_t i = 0;
        while (i + 2 < n && t > x_[i + 1]) ++i;
        const double h = x_[i + 1] - x_[i];
        const double l = t - x_[i];
        const double r = x_[i + 1] - t;
        return (l * g_[i + 1] + r * g_[i]) / h
               - l * r / 6.0 * ((1.0 + l / h) * gamma_[i + 1] + (1.0 + r / h) * gamma_[i]);
    }

private:
    void setup(std::span<const double> x, std::span<const double> y)
    {
        const auto n = x.size();
        if (n < 3 || y.size() != n) throw ValidationError("smoothing spline needs at least 3 matching points");
        x_.assign(x.begin(), x.end());
        y_ = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (!(x_[i + 1] > x_[i])) throw ValidationError("smoothing spline knots must be strictly increasing");

        const auto m = static_cast<Eigen::Index>(n - 2);
        q_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), m);
        r_ = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index k = 1; k <= m; ++k) {
            const double hl = x_[k] - x_[k - 1];
            const double hr = x_[k + 1] - x_[k];
            q_(k - 1, k - 1) = 1.0 / hl;
            q_(k, k - 1) = -1.0 / hl - 1.0 / hr;
            q_(k + 1, k - 1) = 1.0 / hr;
            r_(k - 1, k - 1) = (hl + hr) / 3.0;
            if (k < m) {
                r_(k - 1, k) = hr / 6.0;
                r_(k, k - 1) = hr / 6.0;
            }
        }
        const Eigen::MatrixXd penalty = q_ * r_.ldlt().solve(q_.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty);
        basis_ = eig.eigenvectors();
        kappa_ = eig.eigenvalues().cwiseMax(0.0);
        proj_ = basis_.transpose() * y_;
    }

    double gcv(double alpha) const
    {
        const double n = static_cast<double>(x_.size());
        const Eigen::ArrayXd shrink = 1.0 / (1.0 + alpha * kappa_.array());
        const double trace = shrink.sum();
        const double rss = ((1.0 - shrink) * proj_.array()).square().sum();
        const double dof = n - trace;
        if (dof <= 1e-12) return std::numeric_limits<double>::infinity();
        return n * rss / (dof * dof);
    }

    void solve(double alpha)
    {
        alpha_ = alpha;
        gcv_ = gcv(alpha);
        const Eigen::ArrayXd shrink = 1.0 / (1.0 + alpha * kappa_.array());
        const Eigen::VectorXd fitted = basis_ * (shrink * proj_.array()).matrix();
        g_.assign(fitted.data(), fitted.data() + fitted.size());
        const Eigen::VectorXd interior = r_.ldlt().solve(q_.transpose() * fitted);
        gamma_.assign(x_.size(), 0.0);
        for (Eigen::Index k = 0; k < interior.size(); ++k) gamma_[static_cast<std::size_t>(k) + 1] = interior(k);
    }

    std::vector<double> x_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd q_, r_, basis_;
    Eigen::VectorXd kappa_, proj_;
    std::vector<double> g_, gamma_;
    double alpha_ = 0.0;
    double gcv_ = 0.0;
};

}  // namespace pehaz
