#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "confdiff/geometry.hpp"
#include "confdiff/oracle.hpp"
#include "confdiff/tensor.hpp"
#include "support.hpp"

using namespace confdiff;
using testing_support::eigenvalues;
using testing_support::Rng;

namespace {

constexpr double kPi = std::numbers::pi;
const MediumParams kUnit = MediumParams::make(1.0);

void expect_matrix_near(const Mat2& a, const Mat2& b, double tol) {
    EXPECT_NEAR(a.m11, b.m11, tol);
    EXPECT_NEAR(a.m12, b.m12, tol);
    EXPECT_NEAR(a.m21, b.m21, tol);
    EXPECT_NEAR(a.m22, b.m22, tol);
}

}  // namespace

TEST(MediumParams, RejectsNonPositive) {
    EXPECT_THROW(MediumParams::make(0.0), ConfigError);
    EXPECT_THROW(MediumParams::make(-1.0), ConfigError);
    EXPECT_THROW(MediumParams::make(std::nan("")), ConfigError);
    EXPECT_EQ(MediumParams::make(2.5).d0, 2.5);
}

TEST(RhoOmega, Examples) {
    const RhoOmega a = rho_omega(0.0, 0.0);
    EXPECT_EQ(a.rho, 0.0);
    EXPECT_EQ(a.omega, 1.0);

    const RhoOmega b = rho_omega(0.0, 1.0);
    EXPECT_NEAR(b.omega, 0.78539816339744830962, 1e-15);
    EXPECT_NEAR(b.rho, 0.34657359027997265471, 1e-15);

    const RhoOmega c = rho_omega(-5.0, 5.0);
    EXPECT_NEAR(c.omega, 0.27468015338900317217, 1e-15);
    EXPECT_NEAR(c.omega, (std::atan(5.0) - std::atan(-5.0)) / 10.0, 1e-15);
    EXPECT_EQ(c.rho, 0.0);

    EXPECT_THROW(rho_omega(std::nan(""), 1.0), NumericalError);
    EXPECT_THROW(rho_omega(0.0, INFINITY), NumericalError);
}

TEST(RhoOmega, ContinuityAtParallelLimit) {
    for (double mu : {0.0, 1.0, 5.0}) {
        const double q = 1.0 + mu * mu;
        double c_fit = 0.0;
        double errs[3];
        const double hs[3] = {1e-2, 1e-3, 1e-4};
        for (int k = 0; k < 3; ++k) {
            const RhoOmega r = rho_omega(mu - hs[k], mu + hs[k]);
            errs[k] = std::hypot(r.rho - mu / q, r.omega - 1.0 / q);
            c_fit = std::max(c_fit, errs[k] / (hs[k] * hs[k]));
        }
        for (int k = 0; k < 3; ++k) {
            EXPECT_LE(errs[k], c_fit * hs[k] * hs[k] * (1 + 1e-9));
            EXPECT_GE(errs[k], 0.5 * c_fit * hs[k] * hs[k]) << "mu=" << mu << " h=" << hs[k];
        }
        EXPECT_LT(c_fit, 1.0);
    }
}

TEST(RhoOmega, ExchangeSymmetry) {
    Rng rng(11);
    for (int n = 0; n < 1000; ++n) {
        const double m1 = rng.uniform(-10, 10);
        const double m2 = rng.coin() ? rng.uniform(-10, 10) : m1 + rng.uniform(-1e-5, 1e-5);
        const RhoOmega a = rho_omega(m1, m2);
        const RhoOmega b = rho_omega(m2, m1);
        EXPECT_NEAR(a.rho, b.rho, 1e-14);
        EXPECT_NEAR(a.omega, b.omega, 1e-14);
    }
}

TEST(RhoOmega, BranchCorrectness) {
    Rng rng(12);
    int negative = 0;
    for (int n = 0; n < 1000; ++n) {
        const double m1 = rng.uniform(-10, 10);
        const double m2 = rng.uniform(-10, 10);
        if (1.0 + m1 * m2 < 0.0) ++negative;
        EXPECT_NEAR(rho_omega(m1, m2).omega * (m2 - m1), std::atan(m2) - std::atan(m1), 1e-12);
    }
    EXPECT_GT(negative, 200);
}

TEST(EffectiveTensor, ParallelPlanes) {
    const PlaneFrame f = frame_for_planes(Slab::tilted(1.0).planes());
    const EffectiveTensor t = effective_tensor(f, kUnit);
    expect_matrix_near(t.coeffs, Mat2::diag(0.5, 1.0), 1e-15);
    EXPECT_TRUE(t.degenerate_frame);

    const EffectiveTensor u = effective_tensor(f, MediumParams::make(3.0));
    expect_matrix_near(u.coeffs, Mat2::diag(1.5, 3.0), 1e-14);
}

TEST(EffectiveTensor, UnitSlopeWedge) {
    const auto cfg = PlaneConfig::from_directions({0, 0, -1}, {-1, 0, 1});
    const EffectiveTensor t = effective_tensor(frame_for_planes(cfg), kUnit);
    expect_matrix_near(t.coeffs, Mat2::diag(kPi / 4, 1.0), 1e-15);
}

TEST(EffectiveTensor, UntiltedFrameWithZeroSlopes) {
    Rng rng(13);
    for (int n = 0; n < 50; ++n) {
        FrameData fd;
        const double a = rng.uniform(0, 2 * kPi);
        fd.xhat = {std::cos(a), std::sin(a)};
        fd.yhat = perp(fd.xhat);
        const EffectiveTensor t = effective_tensor(fd, MediumParams::make(2.0));
        EXPECT_EQ(t.coeffs, 2.0 * Mat2::identity());
    }
}

TEST(EffectiveTensor, ComponentFormula) {
    Rng rng(14);
    for (int n = 0; n < 200; ++n) {
        const double m1 = rng.uniform(-10, 10), m2 = rng.uniform(-10, 10);
        const double psi = rng.uniform(-1.5, 1.5);
        const Mat2 d = effective_matrix(psi, m1, m2, MediumParams::make(2.0));
        const RhoOmega ro = rho_omega(m1, m2);
        const double mu = 0.5 * (m1 + m2), s = std::sin(psi), c = std::cos(psi);
        EXPECT_EQ(d.m11, 2.0 * ro.omega);
        EXPECT_NEAR(d.m12, -2.0 * ro.omega * mu * s, 1e-13);
        EXPECT_NEAR(d.m21, -2.0 * ro.rho * s, 1e-13);
        EXPECT_NEAR(d.m22, 2.0 * (c * c + mu * ro.rho * s * s), 1e-13);
        EXPECT_GT(d.m11, 0.0);
    }
}

TEST(EffectiveTensor, ZeroTiltHasDiagonalForm) {
    Rng rng(15);
    for (int n = 0; n < 200; ++n) {
        const Mat2 d = effective_matrix(0.0, rng.uniform(-10, 10), rng.uniform(-10, 10), kUnit);
        EXPECT_EQ(d.m12, 0.0);
        EXPECT_EQ(d.m21, 0.0);
        EXPECT_EQ(d.m22, 1.0);
    }
}

TEST(EffectiveTensor, PolarFactorIsPositiveSemiDefinite) {
    Rng rng(16);
    for (int n = 0; n < 1000; ++n) {
        const double d0 = rng.uniform(0.1, 5);
        const Mat2 d = effective_matrix(rng.uniform(-kPi / 2, kPi / 2), rng.uniform(-10, 10),
                                        rng.uniform(-10, 10), MediumParams::make(d0));
        const auto [lo, hi] = eigenvalues(polar_decompose(d).S);
        EXPECT_GE(lo, -1e-12 * d0);
        EXPECT_GE(hi, lo);
    }
}

TEST(EffectiveTensor, SymmetricPartCanBeIndefinite) {
    // strong tilt with a large slope contrast: the symmetric part has a negative eigenvalue,
    // so semi-definiteness only holds for the polar factor
    const Mat2 d = effective_matrix(1.4, 0.0, 10.0, kUnit);
    const Mat2 sym = 0.5 * (d + transpose(d));
    EXPECT_LT(eigenvalues(sym).first, -0.04);
    EXPECT_GE(eigenvalues(polar_decompose(d).S).first, 0.0);
}

TEST(EffectiveTensor, ExtremeTiltIsRejected) {
    FrameData fd;
    fd.psi = kPi / 2;
    fd.extreme_tilt = true;
    EXPECT_THROW(effective_tensor(fd, kUnit), DegenerateError);
    FrameData near;
    near.psi = kPi / 2 - 1e-12;
    EXPECT_THROW(effective_tensor(near, kUnit), DegenerateError);
    try {
        effective_tensor(near, kUnit);
    } catch (const DegenerateError& e) {
        EXPECT_EQ(e.psi(), near.psi);
    }
}

TEST(ExtremeTilt, UnitSlopeEigenvalue) {
    const ExtremeTilt t = extreme_tilt_tensor(0.0, 1.0, TiltSign::plus, kUnit);
    EXPECT_NEAR(t.eigenvalue, 0.95868495853743463697, 1e-15);
    const auto [lo, hi] = eigenvalues(t.coeffs);
    EXPECT_NEAR(lo, 0.0, 1e-12);
    EXPECT_NEAR(hi, 0.95868495853743463697, 1e-12);
}

TEST(ExtremeTilt, SymmetricSlopes) {
    const ExtremeTilt t = extreme_tilt_tensor(-2.0, 2.0, TiltSign::plus, kUnit);
    const RhoOmega ro = rho_omega(-2.0, 2.0);
    EXPECT_EQ(t.coeffs.m12, 0.0);
    EXPECT_EQ(t.coeffs.m22, 0.0);
    EXPECT_EQ(t.coeffs.m11, ro.omega);
    EXPECT_EQ(t.coeffs.m21, -ro.rho);
    const Vec2 r = t.range_direction;
    EXPECT_NEAR(r.x * ro.rho + r.y * ro.omega, 0.0, 1e-15);
}

TEST(ExtremeTilt, RankOneStructure) {
    Rng rng(17);
    for (int n = 0; n < 1000; ++n) {
        const double m1 = rng.uniform(-10, 10), m2 = rng.uniform(-10, 10);
        const double d0 = rng.uniform(0.5, 3);
        const TiltSign sign = rng.coin() ? TiltSign::plus : TiltSign::minus;
        const double s = sign == TiltSign::plus ? 1.0 : -1.0;
        const MediumParams med = MediumParams::make(d0);
        const ExtremeTilt t = extreme_tilt_tensor(m1, m2, sign, med);
        const RhoOmega ro = rho_omega(m1, m2);
        const double mu = 0.5 * (m1 + m2);
        EXPECT_NEAR(det(t.coeffs), 0.0, 1e-12 * d0 * d0);
        const auto [lo, hi] = eigenvalues(t.coeffs);
        const double lam = d0 * (mu * ro.rho + ro.omega);
        EXPECT_NEAR(std::min(std::abs(lo), std::abs(hi)), 0.0, 1e-12 * (1 + std::abs(lam)));
        EXPECT_NEAR(lo + hi, lam, 1e-12 * (1 + std::abs(lam)));
        // right null vector (mu, -+1), range (omega, +-rho)
        const Vec2 nv = t.coeffs * t.null_direction;
        EXPECT_NEAR(norm(nv), 0.0, 1e-12 * (1 + std::abs(lam)));
        EXPECT_NEAR(t.null_direction.y * std::hypot(mu, 1.0), s, 1e-12);
        const Vec2 rv = t.coeffs * t.range_direction;
        EXPECT_NEAR(rv.x, lam * t.range_direction.x, 1e-11 * (1 + std::abs(lam)));
        EXPECT_NEAR(rv.y, lam * t.range_direction.y, 1e-11 * (1 + std::abs(lam)));
        // the closed form at psi = +-pi/2
        expect_matrix_near(t.coeffs, effective_matrix(s * kPi / 2, m1, m2, med), 1e-12 * d0 * (1 + std::abs(mu)));
        // segment end points +-D0 (mu rho + omega) / |(omega, rho)| (omega, -+rho)
        const double half = lam / std::hypot(ro.omega, ro.rho);
        EXPECT_NEAR(t.segment[0].x, half * ro.omega, 1e-12 * (1 + std::abs(half)));
        EXPECT_NEAR(t.segment[0].y, -s * half * ro.rho, 1e-12 * (1 + std::abs(half)));
        EXPECT_EQ(t.segment[1].x, -t.segment[0].x);
        EXPECT_EQ(t.segment[1].y, -t.segment[0].y);
    }
}

TEST(PolarDecompose, Identity) {
    const EllipsoidData e = polar_decompose(Mat2::identity());
    EXPECT_EQ(e.S, Mat2::identity());
    EXPECT_EQ(e.R, Mat2::identity());
    EXPECT_EQ(e.lambda1, 1.0);
    EXPECT_EQ(e.lambda2, 1.0);
    EXPECT_FALSE(e.degenerate);
}

TEST(PolarDecompose, SymmetricPositiveInput) {
    const Mat2 d = Mat2::diag(kPi / 4 * 2.0, 2.0);
    const EllipsoidData e = polar_decompose(d);
    expect_matrix_near(e.S, d, 1e-15);
    expect_matrix_near(e.R, Mat2::identity(), 1e-15);
    EXPECT_NEAR(e.lambda1, 2.0, 1e-15);
    EXPECT_NEAR(e.lambda2, kPi / 2, 1e-15);
    EXPECT_NEAR(std::abs(e.f1.y), 1.0, 1e-15);
    EXPECT_NEAR(e.f1.x, 0.0, 1e-15);
}

TEST(PolarDecompose, RandomMatrices) {
    Rng rng(18);
    for (int n = 0; n < 1000; ++n) {
        const Mat2 a{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const EllipsoidData e = polar_decompose(a);
        const double scale = frobenius_norm(a);
        EXPECT_LE(max_abs_diff(e.S * e.R, a), 1e-12 * scale);
        EXPECT_LE(max_abs_diff(e.R * transpose(e.R), Mat2::identity()), 1e-12);
        EXPECT_EQ(e.S.m12, e.S.m21);
        EXPECT_LE(norm(e.S * e.f1 - e.lambda1 * e.f1), 1e-10 * scale);
        EXPECT_LE(norm(e.S * e.f2 - e.lambda2 * e.f2), 1e-10 * scale);
        EXPECT_GE(e.lambda1, e.lambda2);
        EXPECT_GE(e.lambda2, 0.0);
        EXPECT_NEAR(dot(e.f1, e.f2), 0.0, 1e-12);
        EXPECT_NEAR(e.e1.x, e.R.m11 * e.f1.x + e.R.m21 * e.f1.y, 1e-15);
        EXPECT_NEAR(e.e2.y, e.R.m12 * e.f2.x + e.R.m22 * e.f2.y, 1e-15);
        EXPECT_NEAR(e.lambda1 * e.lambda2, std::abs(det(a)), 1e-12 * scale * scale);
    }
}

TEST(PolarDecompose, ReflectionAndSingular) {
    const EllipsoidData r = polar_decompose(Mat2{0.0, 1.0, 1.0, 0.0});
    expect_matrix_near(r.S * r.R, Mat2{0.0, 1.0, 1.0, 0.0}, 1e-15);
    EXPECT_NEAR(det(r.R), -1.0, 1e-15);

    const ExtremeTilt t = extreme_tilt_tensor(0.0, 1.0, TiltSign::minus, kUnit);
    const EllipsoidData e = polar_decompose(t.coeffs);
    EXPECT_TRUE(e.degenerate);
    EXPECT_NEAR(e.lambda1, std::sqrt(t.coeffs.m11 * t.coeffs.m11 + t.coeffs.m12 * t.coeffs.m12 +
                                     t.coeffs.m21 * t.coeffs.m21 + t.coeffs.m22 * t.coeffs.m22),
                1e-12);
    EXPECT_EQ(e.lambda2, 0.0);
    EXPECT_LE(max_abs_diff(e.S * e.R, t.coeffs), 1e-12);
    EXPECT_LE(max_abs_diff(e.R * transpose(e.R), Mat2::identity()), 1e-12);

    const EllipsoidData z = polar_decompose(Mat2{});
    EXPECT_TRUE(z.degenerate);
    EXPECT_EQ(z.R, Mat2::identity());
    EXPECT_THROW(polar_decompose(Mat2{NAN, 0, 0, 1}), NumericalError);
}

TEST(PolarDecompose, VaryingTiltSmallAxisVanishes) {
    for (auto [m1, m2] : {std::pair{0.0, 1.0}, std::pair{-3.0, 2.0}, std::pair{1.0, 7.0}}) {
        double prev = polar_decompose(effective_matrix(0.0, m1, m2, kUnit)).lambda2;
        for (int k = 1; k <= 2000; ++k) {
            const double psi = kPi / 2 * k / 2000.0;
            const double l2 = polar_decompose(effective_matrix(psi, m1, m2, kUnit)).lambda2;
            EXPECT_LT(std::abs(l2 - prev), 5e-3);
            prev = l2;
            const double lm = polar_decompose(effective_matrix(-psi, m1, m2, kUnit)).lambda2;
            EXPECT_NEAR(lm, l2, 1e-12);
        }
        EXPECT_LT(prev, 1e-12);
        EXPECT_LT(polar_decompose(effective_matrix(kPi / 2 - 1e-6, m1, m2, kUnit)).lambda2, 1e-5);
    }
}

TEST(ChannelRecovery, Examples) {
    expect_matrix_near(channel_recovery(0.0, 1.0, kUnit), Mat2::diag(kPi / 4, 1.0), 1e-15);
    EXPECT_EQ(channel_recovery(0.0, 0.0, kUnit), Mat2::identity());
    EXPECT_EQ(channel_recovery(1.0, 1.0, kUnit), Mat2::diag(0.5, 1.0));
    expect_matrix_near(channel_recovery(-5.0, 5.0, MediumParams::make(2.0)),
                       Mat2::diag(2 * 0.27468015338900317217, 2.0), 1e-15);
    const expr::Expr z1 = expr::parse("sin(x)-3/2");
    const expr::Expr z2 = expr::parse("cos(2*x)+3/2");
    const Mat2 d = channel_recovery(z1, z2, 0.7, kUnit);
    const double a = std::cos(0.7), b = -2 * std::sin(1.4);
    EXPECT_NEAR(d.m11, (std::atan(b) - std::atan(a)) / (b - a), 1e-14);
    EXPECT_THROW(channel_recovery(z2, z1, 0.7, kUnit), ConfigError);
}

TEST(ChannelRecovery, MatchesOmegaOfSlopes) {
    Rng rng(19);
    for (int n = 0; n < 1000; ++n) {
        const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
        EXPECT_NEAR(channel_recovery(a, b, kUnit).m11, rho_omega(a, b).omega, 1e-14);
    }
}

TEST(ZeroTiltOmega, Examples) {
    EXPECT_NEAR(zero_tilt_omega(0.0, 1.0, 1.0), kPi / 4, 1e-15);
    EXPECT_NEAR(zero_tilt_omega(0.0, 1.0, 1.0), rho_omega(0.0, 1.0).omega, 1e-15);
    EXPECT_EQ(zero_tilt_omega(0.0, 0.0, 3.0), 1.0);
    EXPECT_EQ(zero_tilt_omega(0.4, -2.0, 0.0), 1.0);
    EXPECT_EQ(zero_tilt_omega(2.0, 2.0, 0.5), 0.5);
}

TEST(Pipeline, ZeroTiltConsistency) {
    // z_i = f_i(z) with z = x^2 + x y + sin(y), f1 = -1 - 0.3 sin z, f2 = 1 + 0.5 cos z
    const SurfacePair s(ScalarField::from_text("-1-0.3*sin(x^2+x*y+sin(y))"),
                        ScalarField::from_text("1+0.5*cos(x^2+x*y+sin(y))"), {-2, 2, -2, 2});
    const MediumParams med = MediumParams::make(1.7);
    Rng rng(20);
    for (int n = 0; n < 500; ++n) {
        const Vec2 p{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const double z = p.x * p.x + p.x * p.y + std::sin(p.y);
        const double gz = std::hypot(2 * p.x + p.y, p.x + std::cos(p.y));
        const double f1p = -0.3 * std::cos(z), f2p = -0.5 * std::sin(z);
        const FrameData fd = frame_for_surfaces(s, p);
        ASSERT_TRUE(fd.has_tensor());
        const Mat2 d = effective_tensor(fd, med).coeffs;
        EXPECT_NEAR(d.m12, 0.0, 1e-10);
        EXPECT_NEAR(d.m21, 0.0, 1e-10);
        EXPECT_NEAR(d.m22, med.d0, 1e-10);
        EXPECT_NEAR(d.m11 / med.d0, zero_tilt_omega(f1p, f2p, gz), 1e-10);
    }
}
