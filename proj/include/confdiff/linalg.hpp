#pragma once

#include <algorithm>
#include <cmath>

namespace confdiff {

struct Vec2 {
    double x{};
    double y{};

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Counter-clockwise rotation by 90 degrees: (-a_y, a_x).
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

struct Vec3 {
    double x{};
    double y{};
    double z{};

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend constexpr Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(Vec3, Vec3) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

/// 2x2 real matrix acting on column vectors.
struct Mat2 {
    double m11{};
    double m12{};
    double m21{};
    double m22{};

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diag(double a, double b) { return {a, 0.0, 0.0, b}; }
    /// Matrix whose columns are `c1` and `c2`.
    static constexpr Mat2 from_columns(Vec2 c1, Vec2 c2) { return {c1.x, c2.x, c1.y, c2.y}; }

    constexpr Vec2 col1() const { return {m11, m21}; }
    constexpr Vec2 col2() const { return {m12, m22}; }

    friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
        return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
    }
    friend constexpr Vec2 operator*(const Mat2& a, Vec2 v) {
        return {a.m11 * v.x + a.m12 * v.y, a.m21 * v.x + a.m22 * v.y};
    }
    friend constexpr Mat2 operator*(double s, const Mat2& a) {
        return {s * a.m11, s * a.m12, s * a.m21, s * a.m22};
    }
    friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
        return {a.m11 + b.m11, a.m12 + b.m12, a.m21 + b.m21, a.m22 + b.m22};
    }
    friend constexpr Mat2 operator-(const Mat2& a, const Mat2& b) {
        return {a.m11 - b.m11, a.m12 - b.m12, a.m21 - b.m21, a.m22 - b.m22};
    }
    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr Mat2 transpose(const Mat2& a) { return {a.m11, a.m21, a.m12, a.m22}; }
constexpr double det(const Mat2& a) { return a.m11 * a.m22 - a.m12 * a.m21; }
constexpr double trace(const Mat2& a) { return a.m11 + a.m22; }

inline double frobenius_norm(const Mat2& a) {
    return std::sqrt(a.m11 * a.m11 + a.m12 * a.m12 + a.m21 * a.m21 + a.m22 * a.m22);
}

/// Largest singular value.
inline double spectral_norm(const Mat2& a) {
    const double f2 = a.m11 * a.m11 + a.m12 * a.m12 + a.m21 * a.m21 + a.m22 * a.m22;
    const double d = det(a);
    const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * d * d));
    return std::sqrt(0.5 * (f2 + disc));
}

/// Largest absolute entry of a - b.
inline double max_abs_diff(const Mat2& a, const Mat2& b) {
    return std::max({std::abs(a.m11 - b.m11), std::abs(a.m12 - b.m12), std::abs(a.m21 - b.m21),
                     std::abs(a.m22 - b.m22)});
}

inline Mat2 inverse(const Mat2& a) {
    const double d = det(a);
    return {a.m22 / d, -a.m12 / d, -a.m21 / d, a.m11 / d};
}

}  // namespace confdiff
