#pragma once

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "confdiff/error.hpp"
#include "confdiff/geometry.hpp"
#include "confdiff/linalg.hpp"
#include "confdiff/parallel.hpp"
#include "confdiff/quadrature.hpp"
#include "confdiff/tensor.hpp"

namespace confdiff {

// ---------------------------------------------------------------------------
// Harmonic-function quadrature on two-plane wedges

struct WedgeQuadratureJob {
    PlaneConfig cfg;
    Vec2 eval_point{1.0, 0.0};  // (x, y) in the wedge frame, x > 0
    int points{128};
    double fd_step{1e-5};  // relative to |eval_point|
    MediumParams med{};
    double gap{1.0};  // separation used when the planes are parallel
};

inline constexpr double kApexDistance = 1e-6;

namespace detail {

/// Column pair (j, v) for one harmonic function: j = (D0 / w) int grad Q dz and
/// v = grad(q / w) with q = int Q dz, by central differences of step h.
template <class Bounds, class Q, class Grad>
std::pair<Vec2, Vec2> flux_and_drive(const GaussLegendre& gl, const Bounds& bounds, const Q& q,
                                     const Grad& grad, Vec2 p, double h, double d0) {
    const auto [lo, hi] = bounds(p);
    const double w = hi - lo;
    const double jx = gl.integrate([&](double z) { return grad(p, z).x; }, lo, hi);
    const double jy = gl.integrate([&](double z) { return grad(p, z).y; }, lo, hi);
    const auto qw = [&](Vec2 r) {
        const auto [a, b] = bounds(r);
        return gl.integrate([&](double z) { return q(r, z); }, a, b) / (b - a);
    };
    const Vec2 v{(qw({p.x + h, p.y}) - qw({p.x - h, p.y})) / (2.0 * h),
                 (qw({p.x, p.y + h}) - qw({p.x, p.y - h})) / (2.0 * h)};
    return {(d0 / w) * Vec2{jx, jy}, v};
}

inline Mat2 solve_columns(std::pair<Vec2, Vec2> c0, std::pair<Vec2, Vec2> c1, double psi) {
    const Mat2 j = Mat2::from_columns(c0.first, c1.first);
    const Mat2 v = Mat2::from_columns(c0.second, c1.second);
    const double scale = frobenius_norm(v);
    if (!(std::abs(det(v)) > 1e-12 * scale * scale)) {
        throw DegenerateError("singular drive matrix in the quadrature oracle", psi);
    }
    return j * inverse(v);
}

}  // namespace detail

/// D of a plane pair rebuilt from two harmonic functions with zero normal
/// derivative on both planes, in the frame of frame_for_planes.
///
/// Non-parallel planes use Q = log(X^2 + Z^2) / 2 and Q = Y in the tilted frame;
/// parallel planes use the tangent coordinate x + mu z and y across a slab of
/// width `gap`.
inline Mat2 quadrature_tensor(const WedgeQuadratureJob& job) {
    const PlaneFrame f = frame_for_planes(job.cfg);
    const Vec2 p = job.eval_point;
    if (!f.parallel && !(p.x > kApexDistance)) {
        throw NumericalError("quadrature oracle: evaluation point too close to the wedge apex");
    }
    if (!(job.fd_step > 0.0)) throw ConfigError("quadrature oracle: fd_step must be positive");
    const GaussLegendre gl(job.points);
    const double h = job.fd_step * std::max(norm(p), 1e-3);
    const double d0 = job.med.d0;

    if (f.parallel) {
        const double mu = f.m1;
        const double gap = job.gap;
        const auto bounds = [&](Vec2 r) { return std::pair{mu * r.x, mu * r.x + gap}; };
        const auto c0 = detail::flux_and_drive(
            gl, bounds, [&](Vec2 r, double z) { return r.x + mu * z; },
            [](Vec2, double) { return Vec2{1.0, 0.0}; }, p, h, d0);
        const auto c1 = detail::flux_and_drive(
            gl, bounds, [](Vec2 r, double) { return r.y; },
            [](Vec2, double) { return Vec2{0.0, 1.0}; }, p, h, d0);
        return detail::solve_columns(c0, c1, f.psi);
    }

    const double sp = std::sin(f.psi);
    const double cp = std::cos(f.psi);
    const double m1 = f.m1;
    const double m2 = f.m2;
    const auto bounds = [&](Vec2 r) {
        return std::pair{(m1 * r.x + r.y * sp) / cp, (m2 * r.x + r.y * sp) / cp};
    };
    const auto big_z = [&](Vec2 r, double z) { return -r.y * sp + z * cp; };
    const auto c0 = detail::flux_and_drive(
        gl, bounds,
        [&](Vec2 r, double z) {
            const double zz = big_z(r, z);
            return 0.5 * std::log(r.x * r.x + zz * zz);
        },
        [&](Vec2 r, double z) {
            const double zz = big_z(r, z);
            const double r2 = r.x * r.x + zz * zz;
            return Vec2{r.x / r2, -sp * zz / r2};
        },
        p, h, d0);
    const auto c1 = detail::flux_and_drive(
        gl, bounds, [&](Vec2 r, double z) { return r.y * cp + z * sp; },
        [&](Vec2, double) { return Vec2{0.0, cp}; }, p, h, d0);
    return detail::solve_columns(c0, c1, f.psi);
}

/// The same reconstruction in global Cartesian components, built from the
/// normals alone: Q = log(distance to the intersection line) and Q = the
/// coordinate along that line. The wedge is the region n1.r <= 0, n2.r <= 0
/// and `p` is a global (x, y) point above it. Needs zdir = (0, 0, 1).
inline Mat2 quadrature_tensor_global(const PlaneConfig& cfg, Vec2 p, int points = 128,
                                     double fd_step = 1e-5, const MediumParams& med = {}) {
    if (!(std::abs(cfg.zdir.x) <= 1e-15 && std::abs(cfg.zdir.y) <= 1e-15 && cfg.zdir.z > 0.0)) {
        throw ConfigError("global quadrature oracle needs the projection direction (0, 0, 1)");
    }
    const Vec3 c = cross(cfg.n1, cfg.n2);
    if (norm(c) < 1e-12) throw ConfigError("global quadrature oracle needs non-parallel planes");
    const Vec3 n = c / norm(c);
    const Vec3 lower_n = cfg.n1.z < 0.0 ? cfg.n1 : cfg.n2;
    const Vec3 upper_n = cfg.n1.z < 0.0 ? cfg.n2 : cfg.n1;
    if (!(lower_n.z < 0.0 && upper_n.z > 0.0)) {
        throw ConfigError("global quadrature oracle: wedge region is not bounded vertically");
    }
    const auto bounds = [&](Vec2 r) {
        return std::pair{-(lower_n.x * r.x + lower_n.y * r.y) / lower_n.z,
                         -(upper_n.x * r.x + upper_n.y * r.y) / upper_n.z};
    };
    {
        const auto [a, b] = bounds(p);
        if (!(b > a)) throw ConfigError("global quadrature oracle: point is not above the wedge");
        const Vec3 mid{p.x, p.y, 0.5 * (a + b)};
        const double along = dot(n, mid);
        if (!(dot(mid, mid) - along * along > kApexDistance * kApexDistance)) {
            throw NumericalError("global quadrature oracle: point too close to the wedge apex");
        }
    }
    const GaussLegendre gl(points);
    const double h = fd_step * std::max(norm(p), 1e-3);
    const auto c0 = detail::flux_and_drive(
        gl, bounds,
        [&](Vec2 r, double z) {
            const Vec3 x{r.x, r.y, z};
            const double a = dot(n, x);
            return 0.5 * std::log(dot(x, x) - a * a);
        },
        [&](Vec2 r, double z) {
            const Vec3 x{r.x, r.y, z};
            const double a = dot(n, x);
            const Vec3 radial = x - a * n;
            const double d2 = dot(radial, radial);
            return Vec2{radial.x / d2, radial.y / d2};
        },
        p, h, med.d0);
    const auto c1 = detail::flux_and_drive(
        gl, bounds, [&](Vec2 r, double z) { return n.x * r.x + n.y * r.y + n.z * z; },
        [&](Vec2, double) { return Vec2{n.x, n.y}; }, p, h, med.d0);
    return detail::solve_columns(c0, c1, std::asin(std::clamp(n.z, -1.0, 1.0)));
}

// ---------------------------------------------------------------------------
// Reflected Brownian motion

/// SplitMix64 as a standard uniform random bit generator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state = 0) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() { return mix(state_ += 0x9E3779B97F4A7C15ULL); }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Independent stream for particle `index` under `seed`.
inline SplitMix64 particle_stream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(index + 0x632BE59BD9B4E019ULL)));
}

/// Parallel planes z1 = slope . (x, y) and z2 = z1 + gap.
struct Slab {
    Vec2 slope{};
    double gap{1.0};

    double lower(Vec2 p) const { return dot(slope, p); }
    double upper(Vec2 p) const { return dot(slope, p) + gap; }
    Vec2 lower_gradient(Vec2) const { return slope; }
    Vec2 upper_gradient(Vec2) const { return slope; }

    /// Outward unit normals of the two walls.
    PlaneConfig planes() const {
        return PlaneConfig::from_directions({slope.x, slope.y, -1.0}, {-slope.x, -slope.y, 1.0});
    }

    /// Slab with slope mu along the direction at angle `rotation`.
    static Slab tilted(double mu, double rotation = 0.0, double gap = 1.0) {
        if (!(gap > 0.0)) throw ConfigError("slab gap must be positive");
        return {{mu * std::cos(rotation), mu * std::sin(rotation)}, gap};
    }
};

/// Wall adaptor for a general surface pair (report-only Monte Carlo).
class SurfaceWalls {
public:
    explicit SurfaceWalls(const SurfacePair& s) : s_(&s) {}

    double lower(Vec2 p) const { return s_->lower().value(p); }
    double upper(Vec2 p) const { return s_->upper().value(p); }
    Vec2 lower_gradient(Vec2 p) const { return s_->lower().gradient(p); }
    Vec2 upper_gradient(Vec2 p) const { return s_->upper().gradient(p); }

private:
    const SurfacePair* s_;
};

struct McJob {
    double d0{1.0};
    double dt{1e-3};
    std::int64_t n_particles{100000};
    std::int64_t n_steps{10000};
    std::uint64_t seed{0};
    Vec3 start{0.0, 0.0, 0.5};
    int blocks{100};  // jackknife blocks
    int workers{1};
};

struct McResult {
    Mat2 estimate;  // in the (xhat, yhat) frame
    Mat2 stderr_;   // jackknife standard errors, same frame
    Mat2 global;    // estimate in global Cartesian components
    Vec2 xhat{1.0, 0.0};
    Vec2 yhat{0.0, 1.0};
    double elapsed{};
    std::int64_t steps{};
    std::int64_t bounces{};
    std::int64_t double_contact_steps{};
    std::int64_t aborted_steps{};
};

inline constexpr double kWallTolerance = 1e-12;
inline constexpr int kMaxBounces = 8;
inline constexpr double kMaxBadStepFraction = 1e-3;

namespace detail {

struct WalkerTally {
    double dx{};
    double dy{};
    std::int64_t bounces{};
    std::int64_t double_contact{};
    std::int64_t aborted{};
};

/// Illinois (modified regula falsi) root of g on [0, 1] with g(0) >= 0 > g(1).
template <class G>
double wall_crossing(const G& g, double g0, double g1) {
    double a = 0.0, fa = std::max(g0, 0.0);
    double b = 1.0, fb = g1;
    if (fa == 0.0) return 0.0;
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        const double c = (a * fb - b * fa) / (fb - fa);
        const double fc = g(c);
        if (std::abs(fc) <= kWallTolerance || b - a <= 1e-16) return c;
        if (fc > 0.0) {
            a = c;
            fa = fc;
            if (side == 1) fb *= 0.5;
            side = 1;
        } else {
            b = c;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
        }
    }
    return 0.5 * (a + b);
}

inline Vec2 xy(Vec3 q) { return {q.x, q.y}; }

/// Moves q by d with specular reflection at both walls. Returns false, leaving
/// q unchanged, when the bounce budget runs out.
template <class Walls>
bool reflected_step(const Walls& walls, Vec3& q, Vec3 d, WalkerTally& tally) {
    Vec3 pos = q;
    bool hit_lower = false;
    bool hit_upper = false;
    for (int bounce = 0;; ++bounce) {
        Vec3 end = pos + d;
        const double f1 = end.z - walls.lower(xy(end));
        const double f2 = walls.upper(xy(end)) - end.z;
        const bool out1 = f1 < -kWallTolerance;
        const bool out2 = f2 < -kWallTolerance;
        if (!out1 && !out2) {
            if (f1 < 0.0) end.z = walls.lower(xy(end));
            if (f2 < 0.0) end.z = walls.upper(xy(end));
            q = end;
            if (hit_lower && hit_upper) ++tally.double_contact;
            return true;
        }
        if (bounce == kMaxBounces) {
            ++tally.aborted;
            return false;
        }
        const auto g_lower = [&](double t) {
            const Vec3 r = pos + t * d;
            return r.z - walls.lower(xy(r));
        };
        const auto g_upper = [&](double t) {
            const Vec3 r = pos + t * d;
            return walls.upper(xy(r)) - r.z;
        };
        double t = 2.0;
        bool lower_wall = false;
        if (out1) {
            t = wall_crossing(g_lower, pos.z - walls.lower(xy(pos)), f1);
            lower_wall = true;
        }
        if (out2) {
            const double t2 = wall_crossing(g_upper, walls.upper(xy(pos)) - pos.z, f2);
            if (t2 < t) {
                t = t2;
                lower_wall = false;
            }
        }
        Vec3 hit = pos + t * d;
        Vec3 n;
        if (lower_wall) {
            hit.z = walls.lower(xy(hit));
            const Vec2 g = walls.lower_gradient(xy(hit));
            n = Vec3{g.x, g.y, -1.0};
            hit_lower = true;
        } else {
            hit.z = walls.upper(xy(hit));
            const Vec2 g = walls.upper_gradient(xy(hit));
            n = Vec3{-g.x, -g.y, 1.0};
            hit_upper = true;
        }
        n = n / norm(n);
        Vec3 rest = (1.0 - t) * d;
        rest = rest - (2.0 * dot(rest, n)) * n;
        pos = hit;
        d = rest;
        ++tally.bounces;
    }
}

template <class Walls>
WalkerTally run_walker(const Walls& walls, const McJob& job, std::uint64_t index) {
    SplitMix64 rng = particle_stream(job.seed, index);
    boost::random::normal_distribution<double> normal(0.0, std::sqrt(2.0 * job.d0 * job.dt));
    WalkerTally tally;
    Vec3 q = job.start;
    for (std::int64_t s = 0; s < job.n_steps; ++s) {
        const Vec3 d{normal(rng), normal(rng), normal(rng)};
        if (reflected_step(walls, q, d, tally)) {
            if (q.z < walls.lower(xy(q)) || q.z > walls.upper(xy(q))) {
                throw NumericalError("walker left the region between the walls");
            }
        }
    }
    tally.dx = q.x - job.start.x;
    tally.dy = q.y - job.start.y;
    return tally;
}

struct Moments {
    double n{}, sx{}, sy{}, sxx{}, sxy{}, syy{};

    Moments& operator+=(const Moments& o) {
        n += o.n;
        sx += o.sx;
        sy += o.sy;
        sxx += o.sxx;
        sxy += o.sxy;
        syy += o.syy;
        return *this;
    }
    Moments operator-(const Moments& o) const {
        return {n - o.n, sx - o.sx, sy - o.sy, sxx - o.sxx, sxy - o.sxy, syy - o.syy};
    }

    /// Sample covariance of (dx, dy) divided by 2T.
    Mat2 tensor(double elapsed) const {
        const double cxx = (sxx - sx * sx / n) / (n - 1.0);
        const double cxy = (sxy - sx * sy / n) / (n - 1.0);
        const double cyy = (syy - sy * sy / n) / (n - 1.0);
        const double k = 0.5 / elapsed;
        return {k * cxx, k * cxy, k * cxy, k * cyy};
    }
};

}  // namespace detail

/// Projected diffusion tensor of reflected Brownian motion between two walls,
/// D = cov(dx, dy) / (2T), expressed in the frame (xhat, perp(xhat)), with
/// jackknife errors over contiguous particle blocks. The result depends only on
/// the job, not on the worker count.
template <class Walls>
McResult mc_projected_tensor(const Walls& walls, const McJob& job, Vec2 xhat) {
    if (!(job.dt > 0.0) || !std::isfinite(job.dt)) throw ConfigError("mc: dt must be positive");
    if (!(job.d0 > 0.0)) throw ConfigError("mc: D0 must be positive");
    if (job.n_particles < 2 || job.n_steps < 1) {
        throw ConfigError("mc: need at least 2 particles and 1 step");
    }
    {
        const Vec2 s = detail::xy(job.start);
        if (!(job.start.z > walls.lower(s) && job.start.z < walls.upper(s))) {
            throw ConfigError("mc: start point is not strictly between the walls");
        }
    }
    const auto n = static_cast<std::size_t>(job.n_particles);
    std::vector<detail::WalkerTally> tallies(n);
    parallel_for(n, job.workers,
                 [&](std::size_t i) { tallies[i] = detail::run_walker(walls, job, i); });

    McResult res;
    res.xhat = xhat / norm(xhat);
    res.yhat = perp(res.xhat);
    res.elapsed = job.dt * static_cast<double>(job.n_steps);
    res.steps = job.n_particles * job.n_steps;

    const std::size_t nb = std::min<std::size_t>(std::max(job.blocks, 2), n);
    std::vector<detail::Moments> blocks(nb);
    detail::Moments total;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = tallies[i];
        auto& b = blocks[i * nb / n];
        b += {1.0, t.dx, t.dy, t.dx * t.dx, t.dx * t.dy, t.dy * t.dy};
        res.bounces += t.bounces;
        res.double_contact_steps += t.double_contact;
        res.aborted_steps += t.aborted;
    }
    const double bad = static_cast<double>(res.double_contact_steps + res.aborted_steps);
    if (bad > kMaxBadStepFraction * static_cast<double>(res.steps)) {
        throw NumericalError("mc: step size too large, " + std::to_string(res.double_contact_steps) +
                             " steps touched both walls and " + std::to_string(res.aborted_steps) +
                             " exceeded the bounce limit out of " + std::to_string(res.steps));
    }
    for (const auto& b : blocks) total += b;

    const Mat2 basis = Mat2::from_columns(res.xhat, res.yhat);
    const auto to_frame = [&](const Mat2& g) { return transpose(basis) * g * basis; };
    res.global = total.tensor(res.elapsed);
    res.estimate = to_frame(res.global);

    std::vector<Mat2> reps(nb);
    Mat2 mean{};
    for (std::size_t b = 0; b < nb; ++b) {
        reps[b] = to_frame((total - blocks[b]).tensor(res.elapsed));
        mean = mean + reps[b];
    }
    mean = (1.0 / static_cast<double>(nb)) * mean;
    Mat2 var{};
    for (const auto& r : reps) {
        const Mat2 d = r - mean;
        var = var + Mat2{d.m11 * d.m11, d.m12 * d.m12, d.m21 * d.m21, d.m22 * d.m22};
    }
    const double k = (static_cast<double>(nb) - 1.0) / static_cast<double>(nb);
    res.stderr_ = {std::sqrt(k * var.m11), std::sqrt(k * var.m12), std::sqrt(k * var.m21),
                   std::sqrt(k * var.m22)};
    return res;
}

/// Slab run in the frame of frame_for_planes for the slab's walls.
inline McResult mc_projected_tensor(const Slab& slab, const McJob& job) {
    const PlaneFrame f = frame_for_planes(slab.planes());
    return mc_projected_tensor(slab, job, Vec2{f.x.x, f.x.y});
}

/// Report-only run between general surfaces, in the frame at the start point.
inline McResult mc_projected_tensor(const SurfacePair& s, const McJob& job) {
    const FrameData fd = frame_for_surfaces(s, detail::xy(job.start));
    return mc_projected_tensor(SurfaceWalls(s), job, fd.xhat);
}

}  // namespace confdiff
