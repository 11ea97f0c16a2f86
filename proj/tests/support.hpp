#pragma once

#include <cmath>
#include <cstdint>

#include "confdiff/linalg.hpp"
#include "confdiff/oracle.hpp"

namespace testing_support {

/// Small seeded generator for property tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}

    double uniform(double a, double b) {
        return a + (b - a) * (static_cast<double>(g_() >> 11) * 0x1.0p-53);
    }
    int index(int n) { return static_cast<int>(g_() % static_cast<std::uint64_t>(n)); }
    bool coin() { return (g_() >> 63) != 0; }

private:
    confdiff::SplitMix64 g_;
};

/// Eigenvalues of a 2x2 matrix with real spectrum, from the characteristic polynomial.
inline std::pair<double, double> eigenvalues(const confdiff::Mat2& m) {
    const double tr = m.m11 + m.m22;
    const double dt = m.m11 * m.m22 - m.m12 * m.m21;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - dt));
    return {tr / 2.0 - disc, tr / 2.0 + disc};
}

}  // namespace testing_support
