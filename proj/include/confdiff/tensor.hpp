#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "confdiff/error.hpp"
#include "confdiff/expr.hpp"
#include "confdiff/geometry.hpp"
#include "confdiff/linalg.hpp"

namespace confdiff {

struct MediumParams {
    double d0{1.0};  // bulk diffusion constant

    static MediumParams make(double d0) {
        if (!(d0 > 0.0) || !std::isfinite(d0)) throw ConfigError("D0 must be positive and finite");
        return {d0};
    }
};

struct RhoOmega {
    double rho{};
    double omega{};
};

/// Relative gap |m2 - m1| / (1 + |m1| + |m2|) below which the parallel limit
/// replaces the divided differences.
inline constexpr double kSlopeMergeTolerance = 1e-7;

/// Real and imaginary parts of log((1 + i m2) / (1 + i m1)) / (m2 - m1).
///
/// omega uses atan2(m2 - m1, 1 + m1 m2), which equals atan(m2) - atan(m1)
/// for every pair including 1 + m1 m2 < 0. Near m1 = m2 the limit
/// (mu + i) / (1 + mu^2) is used.
inline RhoOmega rho_omega(double m1, double m2) {
    if (!std::isfinite(m1) || !std::isfinite(m2)) throw NumericalError("rho_omega: non-finite slope");
    const double d = m2 - m1;
    if (std::abs(d) > kSlopeMergeTolerance * (1.0 + std::abs(m1) + std::abs(m2))) {
        return {0.5 * std::log1p(d * (m1 + m2) / (1.0 + m1 * m1)) / d,
                std::atan2(d, 1.0 + m1 * m2) / d};
    }
    const double mu = 0.5 * (m1 + m2);
    const double q = 1.0 + mu * mu;
    return {mu / q, 1.0 / q};
}

/// Coefficients of D in the (x-hat, y-hat) frame, acting on column vectors.
inline Mat2 effective_matrix(double psi, double m1, double m2, const MediumParams& med) {
    const auto [rho, omega] = rho_omega(m1, m2);
    const double mu = 0.5 * (m1 + m2);
    const double s = std::sin(psi);
    const double c = std::cos(psi);
    return {med.d0 * omega, -med.d0 * omega * mu * s, -med.d0 * rho * s,
            med.d0 * (c * c + mu * rho * s * s)};
}

/// Effective diffusion matrix together with the frame it is expressed in.
struct EffectiveTensor {
    Mat2 coeffs;
    Vec2 xhat{1.0, 0.0};
    Vec2 yhat{0.0, 1.0};
    bool degenerate_frame{false};
    bool extreme_tilt{false};
};

inline constexpr double kExtremeTiltTolerance = 1e-9;

inline EffectiveTensor effective_tensor(const FrameData& fd, const MediumParams& med) {
    if (fd.extreme_tilt || std::numbers::pi / 2 - std::abs(fd.psi) < kExtremeTiltTolerance) {
        throw DegenerateError("extreme tilt: the effective tensor needs extreme_tilt_tensor", fd.psi);
    }
    return {effective_matrix(fd.psi, fd.m1, fd.m2, med), fd.xhat, fd.yhat, fd.degenerate_frame, false};
}

inline EffectiveTensor effective_tensor(const PlaneFrame& f, const MediumParams& med) {
    if (std::numbers::pi / 2 - std::abs(f.psi) < kExtremeTiltTolerance) {
        throw DegenerateError("extreme tilt: the effective tensor needs extreme_tilt_tensor", f.psi);
    }
    return {effective_matrix(f.psi, f.m1, f.m2, med), {f.x.x, f.x.y}, {f.y.x, f.y.y}, f.parallel,
            false};
}

// ---------------------------------------------------------------------------
// Extreme tilt (psi = +-pi/2): rank-one limits

enum class TiltSign { minus, plus };

struct ExtremeTilt {
    Mat2 coeffs;
    double eigenvalue{};            // the non-zero eigenvalue D0 (mu rho + omega)
    Vec2 null_direction;            // (mu, -+1), unit
    Vec2 range_direction;           // (omega, +-rho), unit
    std::array<Vec2, 2> segment{};  // end points of the degenerate ellipse
};

/// D at psi = -pi/2 (`minus`) or psi = +pi/2 (`plus`) for slopes m1, m2.
inline ExtremeTilt extreme_tilt_tensor(double m1, double m2, TiltSign sign, const MediumParams& med) {
    const auto [rho, omega] = rho_omega(m1, m2);
    const double mu = 0.5 * (m1 + m2);
    const double s = sign == TiltSign::plus ? 1.0 : -1.0;
    ExtremeTilt t;
    t.coeffs = {med.d0 * omega, -s * med.d0 * mu * omega, -s * med.d0 * rho, med.d0 * mu * rho};
    t.eigenvalue = med.d0 * (mu * rho + omega);
    const Vec2 nv{mu, s};
    t.null_direction = nv / norm(nv);
    const Vec2 rv{omega, -s * rho};
    t.range_direction = rv / norm(rv);
    const double half = med.d0 * (mu * rho + omega) / std::sqrt(omega * omega + rho * rho);
    t.segment = {half * rv, -half * rv};
    return t;
}

// ---------------------------------------------------------------------------
// Polar decomposition and diffusion ellipse

struct EllipsoidData {
    Mat2 S;  // symmetric positive semi-definite factor
    Mat2 R;  // orthogonal factor, D = S R
    double lambda1{};
    double lambda2{};  // lambda1 >= lambda2 >= 0, ellipse semi-axes
    Vec2 f1, f2;       // ellipse axes (eigenvectors of S)
    Vec2 e1, e2;       // principal response directions R^T f_i
    bool degenerate{false};
};

/// D = S R with S = (D D^T)^(1/2) and R orthogonal.
///
/// For det(D) >= 0, R is the rotation by atan2(d21 - d12, d11 + d22), which
/// makes D R^T symmetric with non-negative trace; this also covers singular
/// D, where R completes the pseudo-inverse to a rotation.
inline EllipsoidData polar_decompose(const Mat2& a) {
    if (!std::isfinite(a.m11) || !std::isfinite(a.m12) || !std::isfinite(a.m21) ||
        !std::isfinite(a.m22)) {
        throw NumericalError("polar_decompose: non-finite matrix");
    }
    EllipsoidData e;
    const double d = det(a);
    const bool reflect = d < 0.0;
    // with a reflection, decompose a * diag(1, -1) instead
    const Mat2 b = reflect ? Mat2{a.m11, -a.m12, a.m21, -a.m22} : a;
    const double theta = std::atan2(b.m21 - b.m12, b.m11 + b.m22);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const Mat2 rot{c, -s, s, c};
    Mat2 S = b * transpose(rot);
    const double off = 0.5 * (S.m12 + S.m21);
    S.m12 = off;
    S.m21 = off;
    e.S = S;
    e.R = reflect ? rot * Mat2::diag(1.0, -1.0) : rot;

    const double mean = 0.5 * (S.m11 + S.m22);
    const double rad = std::hypot(0.5 * (S.m11 - S.m22), off);
    e.lambda1 = mean + rad;
    e.lambda2 = e.lambda1 > 0.0 ? std::abs(d) / e.lambda1 : 0.0;
    const double phi = 0.5 * std::atan2(2.0 * off, S.m11 - S.m22);
    e.f1 = {std::cos(phi), std::sin(phi)};
    e.f2 = perp(e.f1);
    const Mat2 rt = transpose(e.R);
    e.e1 = rt * e.f1;
    e.e2 = rt * e.f2;
    e.degenerate = !(e.lambda2 > 1e-12 * e.lambda1);
    return e;
}

inline EllipsoidData polar_decompose(const EffectiveTensor& t) { return polar_decompose(t.coeffs); }

// ---------------------------------------------------------------------------
// Closed forms for special geometries

namespace detail {

/// atan(b) - atan(a) written through atan((b - a) / (1 + ab)) plus the branch
/// term, so the difference keeps full relative accuracy when b is close to a.
inline double arctan_difference(double b, double a) {
    const double d = b - a;
    const double q = 1.0 + a * b;
    if (q > 0.0) return std::atan(d / q);
    if (q == 0.0) return std::copysign(std::numbers::pi / 2, d);
    return std::atan(d / q) + std::copysign(std::numbers::pi, d);
}

inline double divided_arctan(double a, double b) {
    const double d = b - a;
    if (std::abs(d) <= kSlopeMergeTolerance * (1.0 + std::abs(a) + std::abs(b))) {
        const double mean = 0.5 * (a + b);
        return 1.0 / (1.0 + mean * mean);
    }
    return arctan_difference(b, a) / d;
}

}  // namespace detail

/// D for a planar channel z1(x) < z < z2(x), from the two wall slopes:
/// D0 diag((atan z2' - atan z1') / (z2' - z1'), 1), or D0 diag(1 / (1 + z1'^2), 1)
/// where the slopes coincide.
inline Mat2 channel_recovery(double z1p, double z2p, const MediumParams& med) {
    return Mat2::diag(med.d0 * detail::divided_arctan(z1p, z2p), med.d0);
}

/// Same, with the wall profiles given as expressions of x evaluated at `x`.
inline Mat2 channel_recovery(const expr::Expr& z1, const expr::Expr& z2, double x,
                             const MediumParams& med) {
    if (!(z2(x, 0.0) > z1(x, 0.0))) throw ConfigError("channel_recovery: need z2(x) > z1(x)");
    const double z1p = expr::differentiate(z1, expr::Var::x)(x, 0.0);
    const double z2p = expr::differentiate(z2, expr::Var::x)(x, 0.0);
    return channel_recovery(z1p, z2p, med);
}

/// omega for surfaces z_i = f_i(z(x, y)) with f_i' = f1p, f2p and |grad z| = gz.
inline double zero_tilt_omega(double f1p, double f2p, double gz) {
    return detail::divided_arctan(f1p * gz, f2p * gz);
}

}  // namespace confdiff
