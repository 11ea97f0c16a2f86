#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "confdiff/error.hpp"
#include "confdiff/geometry.hpp"
#include "confdiff/linalg.hpp"
#include "confdiff/tensor.hpp"

namespace confdiff {

/// Frame components B M B^T with B = [xhat yhat].
inline Mat2 to_cartesian(const EffectiveTensor& t) {
    if (t.extreme_tilt) throw DegenerateError("to_cartesian: no frame at an extreme-tilt point", 0.0);
    const double ox = std::abs(dot(t.xhat, t.yhat));
    if (!(ox <= 1e-12) || !(std::abs(norm(t.xhat) - 1.0) <= 1e-12) ||
        !(std::abs(norm(t.yhat) - 1.0) <= 1e-12)) {
        throw NumericalError("to_cartesian: frame is not orthonormal");
    }
    const Mat2 b = Mat2::from_columns(t.xhat, t.yhat);
    return b * t.coeffs * transpose(b);
}

/// Cell-centred state of the projected diffusion equation on a rectangle.
/// Cell (i, j) has centre (x0 + (i + 1/2) hx, y0 + (j + 1/2) hy) and index j * nx + i.
struct PdeGrid {
    Rect domain;
    int nx{0};
    int ny{0};
    double hx{};
    double hy{};
    double d0{1.0};
    double t{0.0};
    std::vector<double> p;  // effective density
    std::vector<double> w;  // width
    std::vector<Mat2> D;    // tensor in global Cartesian components

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    Vec2 center(int i, int j) const {
        return {domain.x0 + (i + 0.5) * hx, domain.y0 + (j + 0.5) * hy};
    }
    std::size_t size() const { return p.size(); }

    double mass() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s * hx * hy;
    }
};

/// Grid with w and D from callables of the cell centre.
template <class WFn, class DFn>
PdeGrid make_grid(Rect domain, int nx, int ny, double d0, WFn&& wfn, DFn&& dfn) {
    if (domain.empty()) throw ConfigError("pde: domain is empty");
    if (nx < 2 || ny < 2) throw ConfigError("pde: resolution must be at least 2x2");
    if (!(d0 > 0.0)) throw ConfigError("pde: D0 must be positive");
    PdeGrid g;
    g.domain = domain;
    g.nx = nx;
    g.ny = ny;
    g.hx = (domain.x1 - domain.x0) / nx;
    g.hy = (domain.y1 - domain.y0) / ny;
    g.d0 = d0;
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    g.p.assign(n, 0.0);
    g.w.resize(n);
    g.D.resize(n);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Vec2 c = g.center(i, j);
            const double wv = wfn(c);
            if (!(wv > 0.0) || !std::isfinite(wv)) throw ConfigError("pde: non-positive width in a cell");
            g.w[g.index(i, j)] = wv;
            g.D[g.index(i, j)] = dfn(c);
        }
    }
    return g;
}

/// Flat slab: w = 1 and D = D0 I.
inline PdeGrid flat_grid(Rect domain, int nx, int ny, double d0) {
    return make_grid(domain, nx, ny, d0, [](Vec2) { return 1.0; },
                     [d0](Vec2) { return d0 * Mat2::identity(); });
}

/// Grid for a surface pair: w and the finite-rate tensor at every cell centre.
/// Extreme-tilt cells have no tensor and are rejected.
inline PdeGrid grid_from_surfaces(const SurfacePair& s, int nx, int ny, const MediumParams& med,
                                  const FrameOptions& opt = {}) {
    int bad = 0;
    Vec2 first{};
    PdeGrid g = make_grid(
        s.domain(), nx, ny, med.d0, [&](Vec2 c) { return s.width(c); },
        [&](Vec2 c) {
            const FrameData fd = frame_for_surfaces(s, c, opt);
            if (fd.extreme_tilt) {
                if (bad++ == 0) first = c;
                return Mat2{};
            }
            return to_cartesian(effective_tensor(fd, med));
        });
    if (bad > 0) {
        throw ConfigError("pde: " + std::to_string(bad) +
                          " cells have extreme tilt and no effective tensor, first at (" +
                          expr::detail::format_double(first.x) + ", " +
                          expr::detail::format_double(first.y) + ")");
    }
    return g;
}

template <class F>
void set_density(PdeGrid& g, F&& f) {
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) g.p[g.index(i, j)] = f(g.center(i, j));
    }
}

/// Largest time step allowed by the explicit scheme: 0.2 min(hx, hy)^2 / max ||D||.
inline double max_stable_dt(const PdeGrid& g, bool infinite_rate = false) {
    double dmax = g.d0;
    if (!infinite_rate) {
        dmax = 0.0;
        for (const Mat2& d : g.D) dmax = std::max(dmax, spectral_norm(d));
    }
    const double h = std::min(g.hx, g.hy);
    return dmax > 0.0 ? 0.2 * h * h / dmax : std::numeric_limits<double>::infinity();
}

namespace detail {

/// One explicit Euler step of dp/dt = div(w D grad(p / w)) with zero flux
/// through the outer boundary. `tensor(k)` returns D for cell k.
template <class TensorAt>
void conservative_step(PdeGrid& g, double dt, const TensorAt& tensor) {
    const int nx = g.nx;
    const int ny = g.ny;
    const std::size_t n = g.size();
    std::vector<double> u(n), gx(n), gy(n), div(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) u[k] = g.p[k] / g.w[k];
    // centred cell gradients with mirror ghosts
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = g.index(i, j);
            const double ue = u[g.index(std::min(i + 1, nx - 1), j)];
            const double uw = u[g.index(std::max(i - 1, 0), j)];
            const double un = u[g.index(i, std::min(j + 1, ny - 1))];
            const double us = u[g.index(i, std::max(j - 1, 0))];
            gx[k] = (ue - uw) / (2.0 * g.hx);
            gy[k] = (un - us) / (2.0 * g.hy);
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const std::size_t a = g.index(i, j);
            const std::size_t b = g.index(i + 1, j);
            const double wf = 0.5 * (g.w[a] + g.w[b]);
            const Mat2 da = tensor(a);
            const Mat2 db = tensor(b);
            const double d11 = 0.5 * (da.m11 + db.m11);
            const double d12 = 0.5 * (da.m12 + db.m12);
            const double ux = (u[b] - u[a]) / g.hx;
            const double uy = 0.5 * (gy[a] + gy[b]);
            const double flux = -wf * (d11 * ux + d12 * uy);
            div[a] += flux / g.hx;
            div[b] -= flux / g.hx;
        }
    }
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const std::size_t a = g.index(i, j);
            const std::size_t b = g.index(i, j + 1);
            const double wf = 0.5 * (g.w[a] + g.w[b]);
            const Mat2 da = tensor(a);
            const Mat2 db = tensor(b);
            const double d21 = 0.5 * (da.m21 + db.m21);
            const double d22 = 0.5 * (da.m22 + db.m22);
            const double ux = 0.5 * (gx[a] + gx[b]);
            const double uy = (u[b] - u[a]) / g.hy;
            const double flux = -wf * (d21 * ux + d22 * uy);
            div[a] += flux / g.hy;
            div[b] -= flux / g.hy;
        }
    }
    for (std::size_t k = 0; k < n; ++k) g.p[k] -= dt * div[k];
    g.t += dt;
}

inline void check_dt(const PdeGrid& g, double dt, bool infinite_rate) {
    if (!(dt > 0.0)) throw ConfigError("pde: time step must be positive");
    const double bound = max_stable_dt(g, infinite_rate);
    if (dt > bound) {
        throw ConfigError("pde: time step " + expr::detail::format_double(dt) +
                          " exceeds the stability bound " + expr::detail::format_double(bound));
    }
}

}  // namespace detail

/// Finite-rate step with the per-cell tensor in g.D.
inline void step_finite_rate_inplace(PdeGrid& g, double dt) {
    detail::check_dt(g, dt, false);
    detail::conservative_step(g, dt, [&](std::size_t k) { return g.D[k]; });
}

/// Infinite-rate step: the same fluxes with D = D0 I.
inline void step_infinite_rate_inplace(PdeGrid& g, double dt) {
    detail::check_dt(g, dt, true);
    const Mat2 iso = g.d0 * Mat2::identity();
    detail::conservative_step(g, dt, [&](std::size_t) { return iso; });
}

inline PdeGrid step_finite_rate(PdeGrid g, double dt) {
    step_finite_rate_inplace(g, dt);
    return g;
}

inline PdeGrid step_infinite_rate(PdeGrid g, double dt) {
    step_infinite_rate_inplace(g, dt);
    return g;
}

/// Centre of mass and second central moment of p along `dir` (unit).
inline double variance_along(const PdeGrid& g, Vec2 dir) {
    double m = 0.0, s1 = 0.0, s2 = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const double v = g.p[g.index(i, j)];
            const double s = dot(g.center(i, j), dir);
            m += v;
            s1 += v * s;
            s2 += v * s * s;
        }
    }
    const double mean = s1 / m;
    return s2 / m - mean * mean;
}

}  // namespace confdiff
