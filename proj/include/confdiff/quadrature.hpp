#pragma once

#include <cmath>
#include <numbers>
#include <tuple>
#include <utility>
#include <vector>

#include "confdiff/error.hpp"

namespace confdiff {

/// n-point Gauss-Legendre rule on [-1, 1]. Nodes come from Newton iteration on
/// P_n started at the Chebyshev-like guess cos(pi (i - 1/4) / (n + 1/2)).
class GaussLegendre {
public:
    explicit GaussLegendre(int n) {
        if (n < 1) throw ConfigError("quadrature needs at least one point");
        nodes_.resize(n);
        weights_.resize(n);
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            auto [p, dp] = legendre(n, x);
            for (int it = 0; it < 100; ++it) {
                const double dx = p / dp;
                x -= dx;
                std::tie(p, dp) = legendre(n, x);
                if (std::abs(dx) <= 1e-16) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes_[i] = -x;
            nodes_[n - 1 - i] = x;
            weights_[i] = w;
            weights_[n - 1 - i] = w;
        }
        if (n % 2 == 1) nodes_[n / 2] = 0.0;
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    /// Integral of f over [a, b]; a > b gives the negated integral.
    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double c = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(c + h * nodes_[i]);
        return h * s;
    }

private:
    // P_n(x) and P_n'(x) by the three-term recurrence.
    static std::pair<double, double> legendre(int n, double x) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
    }

    std::vector<double> nodes_;
    std::vector<double> weights_;
};

}  // namespace confdiff
