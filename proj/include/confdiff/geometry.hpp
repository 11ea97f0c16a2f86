#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "confdiff/error.hpp"
#include "confdiff/expr.hpp"
#include "confdiff/linalg.hpp"

namespace confdiff {

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
    double x0{};
    double x1{};
    double y0{};
    double y1{};

    bool empty() const { return !(x1 > x0) || !(y1 > y0); }

    bool contains(Vec2 p, double rel_tol = 1e-12) const {
        const double tx = rel_tol * std::max({1.0, std::abs(x0), std::abs(x1)});
        const double ty = rel_tol * std::max({1.0, std::abs(y0), std::abs(y1)});
        return p.x >= x0 - tx && p.x <= x1 + tx && p.y >= y0 - ty && p.y <= y1 + ty;
    }
};

/// Values on a uniform lattice: values[j * nx + i] sits at (x0 + i*hx, y0 + j*hy).
struct GridData {
    double x0{};
    double y0{};
    double hx{1.0};
    double hy{1.0};
    int nx{0};
    int ny{0};
    std::vector<double> values;

    Rect hull() const { return {x0, x0 + (nx - 1) * hx, y0, y0 + (ny - 1) * hy}; }
};

/// Reads a lattice file: '#' comment lines, then a header "nx ny x0 y0 hx hy",
/// then ny rows of nx values. Commas and whitespace both separate fields.
inline GridData read_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid file '" + path + "'");
    std::string content;
    for (std::string line; std::getline(in, line);) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        content += line;
        content += '\n';
    }
    std::istringstream ss(content);
    GridData g;
    if (!(ss >> g.nx >> g.ny >> g.x0 >> g.y0 >> g.hx >> g.hy)) {
        throw ConfigError("grid file '" + path + "': malformed header (nx ny x0 y0 hx hy)");
    }
    if (g.nx < 2 || g.ny < 2 || !(g.hx > 0.0) || !(g.hy > 0.0)) {
        throw ConfigError("grid file '" + path + "': need nx, ny >= 2 and positive spacing");
    }
    g.values.resize(static_cast<std::size_t>(g.nx) * g.ny);
    for (auto& v : g.values) {
        if (!(ss >> v) || !std::isfinite(v)) {
            throw ConfigError("grid file '" + path + "': expected " +
                              std::to_string(g.values.size()) + " finite values");
        }
    }
    double extra = 0.0;
    if (ss >> extra) throw ConfigError("grid file '" + path + "': trailing values");
    return g;
}

/// A twice-differentiable function of (x, y), backed either by an expression
/// with its symbolic partial derivatives or by a sampled lattice.
class ScalarField {
public:
    static ScalarField from_expression(const expr::Expr& e) {
        ScalarField f;
        f.backing_ = ExprBacking{e, expr::differentiate(e, expr::Var::x),
                                 expr::differentiate(e, expr::Var::y)};
        return f;
    }

    static ScalarField from_text(std::string_view text) {
        return from_expression(expr::parse(text));
    }

    static ScalarField from_grid(GridData g) {
        if (g.nx < 2 || g.ny < 2) throw ConfigError("grid field needs at least 2x2 nodes");
        if (g.values.size() != static_cast<std::size_t>(g.nx) * g.ny) {
            throw ConfigError("grid field: value count does not match nx*ny");
        }
        GridBacking b;
        b.gx = nodal_derivative(g, true);
        b.gy = nodal_derivative(g, false);
        b.grid = std::move(g);
        ScalarField f;
        f.backing_ = std::move(b);
        return f;
    }

    double value(Vec2 p) const {
        if (const auto* e = std::get_if<ExprBacking>(&backing_)) return e->f(p);
        const auto& g = std::get<GridBacking>(backing_);
        return bilinear(g.grid, g.grid.values, p);
    }

    Vec2 gradient(Vec2 p) const {
        if (const auto* e = std::get_if<ExprBacking>(&backing_)) return {e->fx(p), e->fy(p)};
        const auto& g = std::get<GridBacking>(backing_);
        return {bilinear(g.grid, g.gx, p), bilinear(g.grid, g.gy, p)};
    }

    bool is_grid() const { return std::holds_alternative<GridBacking>(backing_); }

    /// Lattice hull for grid-backed fields.
    std::optional<Rect> hull() const {
        if (const auto* g = std::get_if<GridBacking>(&backing_)) return g->grid.hull();
        return std::nullopt;
    }

    const expr::Expr* expression() const {
        if (const auto* e = std::get_if<ExprBacking>(&backing_)) return &e->f;
        return nullptr;
    }

    std::string describe() const {
        if (const auto* e = std::get_if<ExprBacking>(&backing_)) return e->f.to_string();
        const auto& g = std::get<GridBacking>(backing_).grid;
        return "grid " + std::to_string(g.nx) + "x" + std::to_string(g.ny);
    }

private:
    struct ExprBacking {
        expr::Expr f, fx, fy;
    };
    struct GridBacking {
        GridData grid;
        std::vector<double> gx, gy;
    };

    // Central differences inside, second-order one-sided at the edges.
    static std::vector<double> nodal_derivative(const GridData& g, bool along_x) {
        std::vector<double> d(g.values.size());
        const int n = along_x ? g.nx : g.ny;
        const double h = along_x ? g.hx : g.hy;
        const auto at = [&](int i, int j) { return g.values[static_cast<std::size_t>(j) * g.nx + i]; };
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const int k = along_x ? i : j;
                const auto v = [&](int kk) { return along_x ? at(kk, j) : at(i, kk); };
                double r = 0.0;
                if (n == 2) {
                    r = (v(1) - v(0)) / h;
                } else if (k == 0) {
                    r = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
                } else if (k == n - 1) {
                    r = (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h);
                } else {
                    r = (v(k + 1) - v(k - 1)) / (2.0 * h);
                }
                d[static_cast<std::size_t>(j) * g.nx + i] = r;
            }
        }
        return d;
    }

    static double bilinear(const GridData& g, const std::vector<double>& data, Vec2 p) {
        if (!g.hull().contains(p)) {
            throw DomainError("query point outside the grid lattice",
                              "(" + expr::detail::format_double(p.x) + ", " +
                                  expr::detail::format_double(p.y) + ")");
        }
        const double fx = std::clamp((p.x - g.x0) / g.hx, 0.0, g.nx - 1.0);
        const double fy = std::clamp((p.y - g.y0) / g.hy, 0.0, g.ny - 1.0);
        const int i = std::min(static_cast<int>(fx), g.nx - 2);
        const int j = std::min(static_cast<int>(fy), g.ny - 2);
        const double tx = fx - i;
        const double ty = fy - j;
        const auto at = [&](int ii, int jj) { return data[static_cast<std::size_t>(jj) * g.nx + ii]; };
        return (1.0 - tx) * (1.0 - ty) * at(i, j) + tx * (1.0 - ty) * at(i + 1, j) +
               (1.0 - tx) * ty * at(i, j + 1) + tx * ty * at(i + 1, j + 1);
    }

    std::variant<ExprBacking, GridBacking> backing_;
};

/// Evenly spaced coordinate `k` of `n` points from `a` to `b` inclusive.
inline double lattice_coord(double a, double b, int k, int n) {
    return n == 1 ? a : a + k * ((b - a) / (n - 1));
}

/// Lower surface z1, upper surface z2 and the rectangle they are defined over.
/// Construction checks w = z2 - z1 > 0 on a validation lattice.
class SurfacePair {
public:
    SurfacePair(ScalarField z1, ScalarField z2, Rect domain, int validation_points = 64)
        : z1_(std::move(z1)), z2_(std::move(z2)), domain_(domain) {
        if (domain_.empty()) throw ConfigError("surface domain is empty");
        for (const ScalarField* f : {&z1_, &z2_}) {
            if (const auto h = f->hull(); h) {
                if (!h->contains({domain_.x0, domain_.y0}) || !h->contains({domain_.x1, domain_.y1})) {
                    throw ConfigError("grid lattice does not cover the surface domain");
                }
            }
        }
        const int n = std::max(validation_points, 2);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const Vec2 p{lattice_coord(domain_.x0, domain_.x1, i, n),
                             lattice_coord(domain_.y0, domain_.y1, j, n)};
                double w = 0.0;
                try {
                    w = z2_.value(p) - z1_.value(p);
                } catch (const DomainError& e) {
                    throw ConfigError(std::string("surface evaluation failed during validation: ") +
                                      e.what());
                }
                if (!(w > 0.0)) {
                    throw ConfigError("non-positive width w = " + expr::detail::format_double(w) +
                                      " at (" + expr::detail::format_double(p.x) + ", " +
                                      expr::detail::format_double(p.y) + ")");
                }
            }
        }
    }

    const ScalarField& lower() const { return z1_; }
    const ScalarField& upper() const { return z2_; }
    const Rect& domain() const { return domain_; }

    void require_inside(Vec2 p) const {
        if (!domain_.contains(p)) {
            throw DomainError("point outside the surface domain",
                              "(" + expr::detail::format_double(p.x) + ", " +
                                  expr::detail::format_double(p.y) + ")");
        }
    }

    /// w(p) = z2(p) - z1(p); throws unless positive.
    double width(Vec2 p) const {
        require_inside(p);
        const double w = z2_.value(p) - z1_.value(p);
        if (!(w > 0.0)) {
            throw NumericalError("non-positive width w = " + expr::detail::format_double(w));
        }
        return w;
    }

    Vec2 width_gradient(Vec2 p) const { return z2_.gradient(p) - z1_.gradient(p); }

private:
    ScalarField z1_;
    ScalarField z2_;
    Rect domain_;
};

inline double width(const SurfacePair& s, Vec2 p) { return s.width(p); }

// ---------------------------------------------------------------------------
// Two planes

/// Unit normals of two planes through a common line, and the projection
/// direction.
struct PlaneConfig {
    Vec3 n1;
    Vec3 n2;
    Vec3 zdir{0.0, 0.0, 1.0};

    /// Validates that all three vectors are unit length to 1e-12.
    static PlaneConfig make(Vec3 n1, Vec3 n2, Vec3 zdir = {0.0, 0.0, 1.0}) {
        for (const Vec3& v : {n1, n2, zdir}) {
            if (!(std::abs(norm(v) - 1.0) <= 1e-12)) {
                throw ConfigError("plane normals and projection direction must be unit vectors");
            }
        }
        return {n1, n2, zdir};
    }

    /// Normalizes the inputs first.
    static PlaneConfig from_directions(Vec3 n1, Vec3 n2, Vec3 zdir = {0.0, 0.0, 1.0}) {
        for (const Vec3& v : {n1, n2, zdir}) {
            if (!(norm(v) > 0.0) || !std::isfinite(norm(v))) {
                throw ConfigError("plane normal or projection direction is zero or non-finite");
            }
        }
        return make(n1 / norm(n1), n2 / norm(n2), zdir / norm(zdir));
    }
};

/// Orthonormal frame of a plane pair: x along n x z, y = z x x, plus the tilt
/// and the two slopes in the tilted frame where the planes read Z = m_i X.
struct PlaneFrame {
    Vec3 x, y, z;
    Vec3 n;  // unit direction of the intersection line
    double psi{};
    double m1{};
    double m2{};
    bool parallel{false};

    double mu() const { return 0.5 * (m1 + m2); }
};

namespace detail {

inline Vec3 some_perpendicular(Vec3 z) {
    if (std::abs(z.x) <= 1e-12 && std::abs(z.y) <= 1e-12) return {0.0, 1.0, 0.0};
    const Vec3 axis = std::abs(z.x) < std::abs(z.y) ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    const Vec3 v = cross(z, axis);
    return v / norm(v);
}

inline double slope_in_frame(Vec3 ni, const PlaneFrame& f) {
    const double den = dot(ni, f.y) * std::sin(f.psi) - dot(ni, f.z) * std::cos(f.psi);
    if (!(std::abs(den) > 1e-12)) {
        throw DegenerateError("plane contains the tilted Z axis (infinite slope)", f.psi);
    }
    return dot(ni, f.x) / den + 0.0;
}

}  // namespace detail

/// Frame, tilt and slopes of a plane pair. Parallel normals use the fallback
/// frame built from n1 alone (tilt 0, m1 = m2). Throws DegenerateError when the
/// intersection line or both planes contain the projection direction.
inline PlaneFrame frame_for_planes(const PlaneConfig& cfg) {
    constexpr double kTiny = 1e-12;
    PlaneFrame f;
    f.z = cfg.zdir;
    const Vec3 c = cross(cfg.n1, cfg.n2);
    if (norm(c) < kTiny) {
        f.parallel = true;
        const Vec3 zn = cross(cfg.zdir, cfg.n1);
        f.n = norm(zn) < kTiny ? detail::some_perpendicular(cfg.zdir) : zn / norm(zn);
        if (std::abs(dot(cfg.n1, cfg.zdir)) < kTiny) {
            throw DegenerateError("parallel planes contain the projection direction",
                                  std::numbers::pi / 2);
        }
        f.psi = 0.0;
    } else {
        f.n = c / norm(c);
        const double nz = std::clamp(dot(f.n, cfg.zdir), -1.0, 1.0);
        f.psi = std::asin(nz);
        if (norm(cross(f.n, cfg.zdir)) < kTiny) {
            throw DegenerateError("intersection line is parallel to the projection direction",
                                  f.psi);
        }
    }
    const Vec3 nx = cross(f.n, f.z);
    f.x = nx / norm(nx);
    f.y = cross(f.z, f.x);
    f.m1 = detail::slope_in_frame(cfg.n1, f);
    f.m2 = detail::slope_in_frame(cfg.n2, f);
    return f;
}

/// Plane pair whose frame has the given tilt and slopes, with x rotated by
/// `rotation` radians about z. Lower plane Z = m1 X, upper plane Z = m2 X,
/// normals pointing out of the region m1 X <= Z <= m2 X.
inline PlaneConfig wedge_planes(double m1, double m2, double psi, double rotation = 0.0) {
    const Vec3 xh{std::cos(rotation), std::sin(rotation), 0.0};
    const Vec3 yh{-std::sin(rotation), std::cos(rotation), 0.0};
    const Vec3 zh{0.0, 0.0, 1.0};
    const Vec3 big_x = xh;
    const Vec3 big_z = -std::sin(psi) * yh + std::cos(psi) * zh;
    const Vec3 n1 = (m1 * big_x - big_z) / std::sqrt(1.0 + m1 * m1);
    const Vec3 n2 = (big_z - m2 * big_x) / std::sqrt(1.0 + m2 * m2);
    return PlaneConfig::from_directions(n1, n2);
}

/// Outward normals of the tangent planes of z = z1 (pointing down) and
/// z = z2 (pointing up) with gradients g1, g2.
inline PlaneConfig tangent_planes(Vec2 g1, Vec2 g2) {
    const double s1 = std::sqrt(1.0 + dot(g1, g1));
    const double s2 = std::sqrt(1.0 + dot(g2, g2));
    return PlaneConfig::make(Vec3{g1.x / s1, g1.y / s1, -1.0 / s1},
                             Vec3{-g2.x / s2, -g2.y / s2, 1.0 / s2});
}

// ---------------------------------------------------------------------------
// Two surfaces

/// How the tilt of a surface pair is computed from the gradients.
enum class TiltConvention {
    /// psi = arcsin(grad z1 . perp grad z2 / (sqrt(1+|grad z1|^2) sqrt(1+|grad z2|^2)))
    table,
    /// psi = atan2(grad z1 . perp grad z2, |grad w|): the tilt of the unit
    /// intersection direction of the two tangent planes.
    unit_normal,
};

struct FrameOptions {
    double eps_grad = 1e-10;  // |grad w| below this selects the degenerate branch
    double eps_psi = 1e-9;    // pi/2 - |psi| below this flags extreme tilt
    TiltConvention tilt = TiltConvention::table;
};

/// Per-point geometry of a surface pair.
struct FrameData {
    double w{};
    Vec2 gradw;
    Vec2 gradperpw;
    Vec2 xhat{1.0, 0.0};
    Vec2 yhat{0.0, 1.0};
    double psi{};
    double m1{};
    double m2{};
    double mu{};
    bool degenerate_frame{false};
    bool extreme_tilt{false};

    /// True when the effective tensor is defined at this point.
    bool has_tensor() const { return !extreme_tilt; }
};

/// Frame data from the width and the two surface gradients at a point.
inline FrameData frame_from_gradients(double w, Vec2 g1, Vec2 g2, const FrameOptions& opt = {}) {
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    FrameData fd;
    fd.w = w;
    fd.gradw = g2 - g1;
    fd.gradperpw = perp(fd.gradw);
    const double gw = norm(fd.gradw);
    const double c = dot(g1, perp(g2));
    const double s1 = std::sqrt(1.0 + dot(g1, g1));
    const double s2 = std::sqrt(1.0 + dot(g2, g2));
    const auto tilt = [&] {
        if (opt.tilt == TiltConvention::table) return std::asin(std::clamp(c / (s1 * s2), -1.0, 1.0));
        return std::atan2(c, gw);
    };

    if (gw < opt.eps_grad) {
        fd.degenerate_frame = true;
        if (std::abs(c) <= opt.eps_grad * std::max(1.0, norm(g1) * norm(g2))) {
            // parallel tangent planes: frame along the common gradient
            const Vec2 g = 0.5 * (g1 + g2);
            if (norm(g) > opt.eps_grad) {
                fd.xhat = g / norm(g);
                fd.yhat = perp(fd.xhat);
            }
            fd.psi = 0.0;
            fd.m1 = dot(g1, fd.xhat) + 0.0;
            fd.m2 = dot(g2, fd.xhat) + 0.0;
            fd.mu = 0.5 * (fd.m1 + fd.m2);
        } else {
            fd.extreme_tilt = true;
            fd.psi = opt.tilt == TiltConvention::table ? tilt() : std::copysign(std::numbers::pi / 2, c);
            fd.m1 = fd.m2 = fd.mu = kNaN;
        }
        return fd;
    }

    fd.xhat = fd.gradw / gw;
    fd.yhat = fd.gradperpw / gw;
    fd.psi = tilt();
    const double sp = std::sin(fd.psi);
    const double cp = std::cos(fd.psi);
    fd.m1 = dot(g1, fd.gradw) / (dot(g1, fd.gradperpw) * sp + gw * cp);
    fd.m2 = dot(g2, fd.gradw) / (dot(g2, fd.gradperpw) * sp + gw * cp);
    fd.mu = 0.5 * (fd.m1 + fd.m2);
    if (std::numbers::pi / 2 - std::abs(fd.psi) < opt.eps_psi) fd.extreme_tilt = true;
    return fd;
}

/// Width, gradients, frame, tilt and slopes of `s` at `p`.
inline FrameData frame_for_surfaces(const SurfacePair& s, Vec2 p, const FrameOptions& opt = {}) {
    const double w = s.width(p);
    return frame_from_gradients(w, s.lower().gradient(p), s.upper().gradient(p), opt);
}

}  // namespace confdiff
