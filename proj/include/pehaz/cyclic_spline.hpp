#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "pehaz/errors.hpp"

namespace pehaz {

// Cyclic cubic regression spline on [0, period) with K evenly spaced knots,
// parameterized by the function values at the knots. Second derivatives at the
// knots follow from B delta = D beta (both circulant), so the function, its
// slope and its curvature all agree at 0 and at `period`.
class CyclicSplineBasis {
public:
    static CyclicSplineBasis make(int K, double period = 12.0)
    {
        if (K < 4) throw ConfigError("cyclic spline basis needs at least 4 knots, got " + std::to_string(K));
        if (!(period > 0.0)) throw ConfigError("cyclic spline period must be positive");
        CyclicSplineBasis b;
        b.k_ = K;
        b.period_ = period;
        b.h_ = period / K;
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(K, K);
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K, K);
        for (int i = 0; i < K; ++i) {
            const int prev = (i + K - 1) % K;
            const int next = (i + 1) % K;
            B(i, i) = 2.0 * b.h_ / 3.0;
            B(i, prev) += b.h_ / 6.0;
            B(i, next) += b.h_ / 6.0;
            D(i, i) = -2.0 / b.h_;
            D(i, prev) += 1.0 / b.h_;
            D(i, next) += 1.0 / b.h_;
        }
        const auto lu = B.partialPivLu();
        b.curvature_ = lu.solve(D);
        b.penalty_ = D.transpose() * b.curvature_;
        b.penalty_ = 0.5 * (b.penalty_ + b.penalty_.transpose());
        for (int i = 0; i < K; ++i) b.knots_.push_back(i * b.h_);
        return b;
    }

    int dim() const { return k_; }
    double period() const { return period_; }
    const std::vector<double>& knots() const { return knots_; }

    // Integral of g''(t)^2 over one period is coef' * penalty * coef.
    const Eigen::MatrixXd& penalty() const { return penalty_; }

    // Row of basis values (order 0), slopes (1) or curvatures (2) at t.
    // t is reduced into [0, period]; t == period is kept as the right end.
    Eigen::RowVectorXd design(double t, int order = 0) const
    {
        if (t < 0.0 || t > period_) {
            t = std::fmod(t, period_);
            if (t < 0.0) t += period_;
        }
        int j = static_cast<int>(std::floor(t / h_));
        if (j >= k_) j = k_ - 1;
        const int next = (j + 1) % k_;
        const double a = (knots_[static_cast<std::size_t>(j)] + h_ - t) / h_;
        const double c = (t - knots_[static_cast<std::size_t>(j)]) / h_;
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k_);
        switch (order) {
        case 0:
            row(j) += a;
            row(next) += c;
            row += h_ * h_ / 6.0 * ((a * a * a - a) * curvature_.row(j) + (c * c * c - c) * curvature_.row(next));
            break;
        case 1:
            row(j) -= 1.0 / h_;
            row(next) += 1.0 / h_;
            row += h_ / 6.0 * (-(3.0 * a * a - 1.0) * curvature_.row(j) + (3.0 * c * c - 1.0) * curvature_.row(next));
            break;
        case 2:
            row = a * curvature_.row(j) + c * curvature_.row(next);
            break;
        default:
            throw ConfigError("derivative order must be 0, 1 or 2");
        }
        return row;
    }

    double evaluate(const Eigen::VectorXd& coef, double t, int order = 0) const { return design(t, order).dot(coef); }

private:
    int k_ = 0;
    double period_ = 12.0;
    double h_ = 1.0;
    std::vector<double> knots_;
    Eigen::MatrixXd curvature_;  // maps knot values to knot second derivatives
    Eigen::MatrixXd penalty_;
};

}  // namespace pehaz
