#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "confdiff/cli/config.hpp"
#include "confdiff/error.hpp"
#include "confdiff/geometry.hpp"
#include "confdiff/oracle.hpp"
#include "confdiff/parallel.hpp"
#include "confdiff/pde.hpp"
#include "confdiff/tensor.hpp"

namespace confdiff::cli {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string num(double v) {
    if (!std::isfinite(v)) return "";
    return expr::detail::format_double(v + 0.0);
}

inline Json to_json(Vec2 v) { return Json::array({v.x, v.y}); }
inline Json to_json(Vec3 v) { return Json::array({v.x, v.y, v.z}); }
inline Json to_json(const Mat2& m) {
    return Json::array({Json::array({m.m11, m.m12}), Json::array({m.m21, m.m22})});
}

inline Json header_json(const Config& cfg) {
    Json j;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion},
                 {"command", std::string(command_name(cfg.command()))}};
    Json c = Json::object();
    for (const auto& [k, v] : cfg.echo()) c[k] = v;
    j["config"] = c;
    return j;
}

inline void write_csv_header(std::ostream& out, const Config& cfg) {
    out << "# " << kToolName << ' ' << kToolVersion << ' ' << command_name(cfg.command()) << '\n';
    for (const auto& [k, v] : cfg.echo()) out << "# " << k << '=' << v << '\n';
}

inline MediumParams medium(const Config& cfg) { return MediumParams::make(cfg.real("d0")); }

inline int workers(const Config& cfg) {
    const long long w = cfg.integer("workers");
    if (w < 0) throw ConfigError("'workers' must be non-negative");
    return static_cast<int>(w);
}

inline FrameOptions frame_options(const Config& cfg) {
    FrameOptions opt;
    const std::string& t = cfg.str("tilt");
    if (t == "table") {
        opt.tilt = TiltConvention::table;
    } else if (t == "unit_normal") {
        opt.tilt = TiltConvention::unit_normal;
    } else {
        throw ConfigError("'tilt' must be table or unit_normal");
    }
    return opt;
}

inline ScalarField field(const Config& cfg, const std::string& key) {
    const std::string grid_key = key + "_grid";
    if (cfg.has_key(grid_key) && !cfg.str(grid_key).empty()) {
        return ScalarField::from_grid(read_grid_file(cfg.str(grid_key)));
    }
    return ScalarField::from_text(cfg.str(key));
}

inline SurfacePair surfaces(const Config& cfg) {
    const long long vp = cfg.integer("validation_points");
    if (vp < 2) throw ConfigError("'validation_points' must be at least 2");
    return SurfacePair(field(cfg, "z1"), field(cfg, "z2"), cfg.rect("domain"), static_cast<int>(vp));
}

inline std::string flags(bool degenerate, bool extreme) {
    std::string s;
    if (degenerate) s += "degenerate_frame";
    if (extreme) s += s.empty() ? "extreme_tilt" : ";extreme_tilt";
    return s;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(SplitMix64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Json ellipsoid_json(const EllipsoidData& e) {
    return {{"lambda1", e.lambda1}, {"lambda2", e.lambda2}, {"f1", to_json(e.f1)},
            {"f2", to_json(e.f2)},  {"e1", to_json(e.e1)},  {"e2", to_json(e.e2)},
            {"S", to_json(e.S)},    {"R", to_json(e.R)},    {"degenerate", e.degenerate}};
}

inline Json error_json(const Config& cfg, const NumericalError& err) {
    Json j = header_json(cfg);
    Json e = {{"kind", "numerical"}, {"message", err.what()}};
    if (const auto* d = dynamic_cast<const DegenerateError*>(&err)) {
        e["kind"] = "degenerate";
        e["psi"] = d->psi();
    }
    j["error"] = e;
    return j;
}

}  // namespace detail

/// Field file: one row per lattice node, row-major (y outer). D is given in the
/// local (xhat, yhat) frame; f1, e1, e2 in global components.
inline int cmd_tensor(const Config& cfg, std::ostream& out) {
    const SurfacePair s = detail::surfaces(cfg);
    const MediumParams med = detail::medium(cfg);
    const FrameOptions opt = detail::frame_options(cfg);
    const auto [nx, ny] = cfg.resolution("resolution");
    const Rect dom = s.domain();
    std::vector<std::string> rows(static_cast<std::size_t>(nx) * ny);
    parallel_for(rows.size(), detail::workers(cfg), [&](std::size_t k) {
        const int i = static_cast<int>(k % nx);
        const int j = static_cast<int>(k / nx);
        const Vec2 p{lattice_coord(dom.x0, dom.x1, i, nx), lattice_coord(dom.y0, dom.y1, j, ny)};
        const FrameData fd = frame_for_surfaces(s, p, opt);
        using detail::num;
        std::string r = num(p.x) + ',' + num(p.y) + ',' + num(fd.w) + ',' + num(fd.psi) + ',' +
                        num(fd.m1) + ',' + num(fd.m2) + ',';
        if (fd.has_tensor()) {
            const EffectiveTensor t = effective_tensor(fd, med);
            const EllipsoidData e = polar_decompose(t);
            const Mat2 b = Mat2::from_columns(t.xhat, t.yhat);
            const Vec2 f1 = b * e.f1;
            const Vec2 e1 = b * e.e1;
            const Vec2 e2 = b * e.e2;
            for (double v : {t.coeffs.m11, t.coeffs.m12, t.coeffs.m21, t.coeffs.m22, e.lambda1,
                             e.lambda2, f1.x, f1.y, e1.x, e1.y, e2.x, e2.y}) {
                r += num(v);
                r += ',';
            }
        } else {
            r += std::string(12, ',');
        }
        r += detail::flags(fd.degenerate_frame, fd.extreme_tilt);
        rows[k] = std::move(r);
    });
    detail::write_csv_header(out, cfg);
    out << "x,y,w,psi,m1,m2,D11,D12,D21,D22,lam1,lam2,f1x,f1y,e1x,e1y,e2x,e2y,flags\n";
    for (const auto& r : rows) out << r << '\n';
    return 0;
}

namespace detail {

inline Json plane_analysis(double psi, double m1, double m2, const MediumParams& med) {
    const RhoOmega ro = rho_omega(m1, m2);
    Json j = {{"psi", psi}, {"m1", m1}, {"m2", m2}, {"mu", 0.5 * (m1 + m2)},
              {"rho", ro.rho}, {"omega", ro.omega}};
    if (std::numbers::pi / 2 - std::abs(psi) < kExtremeTiltTolerance) {
        const ExtremeTilt t =
            extreme_tilt_tensor(m1, m2, psi > 0.0 ? TiltSign::plus : TiltSign::minus, med);
        j["extreme_tilt"] = true;
        j["D"] = to_json(t.coeffs);
        j["eigenvalues"] = Json::array({0.0, t.eigenvalue});
        j["null_direction"] = to_json(t.null_direction);
        j["range_direction"] = to_json(t.range_direction);
        j["segment"] = Json::array({to_json(t.segment[0]), to_json(t.segment[1])});
        j["ellipsoid"] = ellipsoid_json(polar_decompose(t.coeffs));
        return j;
    }
    const Mat2 d = effective_matrix(psi, m1, m2, med);
    j["extreme_tilt"] = false;
    j["D"] = to_json(d);
    j["ellipsoid"] = ellipsoid_json(polar_decompose(d));
    return j;
}

}  // namespace detail

/// Single plane-pair report, from normals or from wedge = m1,m2,psi.
inline int cmd_planes(const Config& cfg, std::ostream& out) {
    const MediumParams med = detail::medium(cfg);
    Json j = detail::header_json(cfg);
    if (!cfg.str("wedge").empty()) {
        const auto v = parse_list("wedge", cfg.str("wedge"), 3);
        if (std::abs(v[2]) > std::numbers::pi / 2 + 1e-15) {
            throw ConfigError("'wedge' tilt must lie in [-pi/2, pi/2]");
        }
        j["analysis"] = detail::plane_analysis(v[2], v[0], v[1], med);
        out << j.dump(2) << '\n';
        return 0;
    }
    const PlaneConfig pc = PlaneConfig::from_directions(cfg.vec3("n1"), cfg.vec3("n2"), cfg.vec3("zdir"));
    PlaneFrame f;
    try {
        f = frame_for_planes(pc);
    } catch (const NumericalError& err) {
        out << detail::error_json(cfg, err).dump(2) << '\n';
        return 3;
    }
    j["frame"] = {{"x", detail::to_json(f.x)}, {"y", detail::to_json(f.y)}, {"z", detail::to_json(f.z)},
                  {"n", detail::to_json(f.n)}, {"parallel", f.parallel}};
    j["analysis"] = detail::plane_analysis(f.psi, f.m1, f.m2, med);
    out << j.dump(2) << '\n';
    return 0;
}

namespace detail {

struct OracleRecord {
    PlaneConfig cfg;
    PlaneFrame frame;
    Mat2 closed;
    Mat2 quad;
};

inline Json oracle_json(const OracleRecord& r, double& max_err) {
    const Mat2 diff = r.quad - r.closed;
    const Mat2 abs{std::abs(diff.m11), std::abs(diff.m12), std::abs(diff.m21), std::abs(diff.m22)};
    const double scale = frobenius_norm(r.closed);
    const double e = std::max({abs.m11, abs.m12, abs.m21, abs.m22});
    max_err = std::max(max_err, e);
    return {{"n1", to_json(r.cfg.n1)},
            {"n2", to_json(r.cfg.n2)},
            {"psi", r.frame.psi},
            {"m1", r.frame.m1},
            {"m2", r.frame.m2},
            {"closed", to_json(r.closed)},
            {"quadrature", to_json(r.quad)},
            {"abs_err", to_json(abs)},
            {"rel_err", to_json((1.0 / scale) * abs)},
            {"max_abs_err", e}};
}

}  // namespace detail

/// Closed form against the quadrature oracle, for one configuration or for
/// `wedges` random ones. rel_err is relative to the Frobenius norm of D.
inline int cmd_oracle(const Config& cfg, std::ostream& out) {
    const MediumParams med = detail::medium(cfg);
    const int points = static_cast<int>(cfg.integer("points"));
    if (points < 1) throw ConfigError("'points' must be positive");
    const double fd_step = cfg.positive("fd_step");
    const double gap = cfg.positive("gap");
    const Vec2 eval = cfg.vec2("eval_point");
    const long long count = cfg.integer("wedges");
    if (count < 0) throw ConfigError("'wedges' must be non-negative");

    const auto evaluate = [&](const PlaneConfig& pc) {
        detail::OracleRecord r{pc, frame_for_planes(pc), {}, {}};
        r.closed = effective_tensor(r.frame, med).coeffs;
        r.quad = quadrature_tensor({pc, eval, points, fd_step, med, gap});
        return r;
    };

    Json j = detail::header_json(cfg);
    double max_err = 0.0;
    if (count == 0) {
        const PlaneConfig pc =
            PlaneConfig::from_directions(cfg.vec3("n1"), cfg.vec3("n2"), cfg.vec3("zdir"));
        detail::OracleRecord r;
        try {
            r = evaluate(pc);
        } catch (const NumericalError& err) {
            out << detail::error_json(cfg, err).dump(2) << '\n';
            return 3;
        }
        j["records"] = Json::array({detail::oracle_json(r, max_err)});
    } else {
        const double m_max = cfg.positive("m_max");
        const double psi_max = cfg.positive("psi_max");
        if (!(psi_max < std::numbers::pi / 2)) throw ConfigError("'psi_max' must be below pi/2");
        const std::uint64_t seed = cfg.unsigned_integer("seed");
        std::vector<detail::OracleRecord> recs(static_cast<std::size_t>(count));
        parallel_for(recs.size(), detail::workers(cfg), [&](std::size_t i) {
            SplitMix64 rng = particle_stream(seed, i);
            const double m1 = m_max * (2.0 * detail::unit_uniform(rng) - 1.0);
            const double m2 = m_max * (2.0 * detail::unit_uniform(rng) - 1.0);
            const double psi = psi_max * (2.0 * detail::unit_uniform(rng) - 1.0);
            const double rot = 2.0 * std::numbers::pi * detail::unit_uniform(rng);
            recs[i] = evaluate(wedge_planes(m1, m2, psi, rot));
        });
        Json arr = Json::array();
        for (const auto& r : recs) arr.push_back(detail::oracle_json(r, max_err));
        j["records"] = std::move(arr);
    }
    j["summary"] = {{"count", j["records"].size()},
                    {"max_abs_err", max_err},
                    {"max_abs_err_over_d0", max_err / med.d0}};
    out << j.dump(2) << '\n';
    return 0;
}

/// Reflected Brownian motion estimate of the projected tensor.
inline int cmd_mc(const Config& cfg, std::ostream& out) {
    const MediumParams med = detail::medium(cfg);
    McJob job;
    job.d0 = med.d0;
    job.dt = cfg.positive("dt");
    job.n_particles = cfg.integer("particles");
    job.n_steps = cfg.integer("steps");
    job.blocks = static_cast<int>(cfg.integer("blocks"));
    job.seed = cfg.unsigned_integer("seed");
    job.workers = detail::workers(cfg);
    const std::string& geometry = cfg.str("geometry");
    Json j = detail::header_json(cfg);
    McResult r;
    if (geometry == "slab") {
        const Slab slab = Slab::tilted(cfg.real("mu"), cfg.real("rotation"), cfg.positive("gap"));
        job.start = cfg.str("start").empty() ? Vec3{0.0, 0.0, 0.5 * slab.gap} : cfg.vec3("start");
        r = mc_projected_tensor(slab, job);
        const double mu = cfg.real("mu");
        j["expected"] = {{"Dxx", med.d0 / (1.0 + mu * mu)}, {"Dyy", med.d0}};
        j["report_only"] = false;
    } else if (geometry == "surfaces") {
        const SurfacePair s = detail::surfaces(cfg);
        if (cfg.str("start").empty()) {
            const Rect d = s.domain();
            const Vec2 c{0.5 * (d.x0 + d.x1), 0.5 * (d.y0 + d.y1)};
            job.start = {c.x, c.y, 0.5 * (s.lower().value(c) + s.upper().value(c))};
        } else {
            job.start = cfg.vec3("start");
        }
        r = mc_projected_tensor(s, job);
        j["report_only"] = true;
    } else {
        throw ConfigError("'geometry' must be slab or surfaces");
    }
    j["estimate"] = detail::to_json(r.estimate);
    j["stderr"] = detail::to_json(r.stderr_);
    j["global"] = detail::to_json(r.global);
    j["frame"] = {{"xhat", detail::to_json(r.xhat)}, {"yhat", detail::to_json(r.yhat)}};
    j["elapsed"] = r.elapsed;
    j["steps"] = r.steps;
    j["bounces"] = r.bounces;
    j["double_contact_steps"] = r.double_contact_steps;
    j["aborted_steps"] = r.aborted_steps;
    out << j.dump(2) << '\n';
    return 0;
}

/// Snapshot series step,t,x,y,w,p at step 0, every snapshot_every steps and at the end.
inline int cmd_solve(const Config& cfg, std::ostream& out) {
    const MediumParams med = detail::medium(cfg);
    const SurfacePair s = detail::surfaces(cfg);
    const auto [nx, ny] = cfg.resolution("resolution");
    const std::string& rate = cfg.str("rate");
    if (rate != "finite" && rate != "infinite") throw ConfigError("'rate' must be finite or infinite");
    const bool infinite = rate == "infinite";
    PdeGrid g = infinite ? make_grid(s.domain(), nx, ny, med.d0, [&](Vec2 c) { return s.width(c); },
                                     [&](Vec2) { return med.d0 * Mat2::identity(); })
                         : grid_from_surfaces(s, nx, ny, med, detail::frame_options(cfg));
    const long long steps = cfg.integer("steps");
    const long long every = cfg.integer("snapshot_every");
    if (steps < 0) throw ConfigError("'steps' must be non-negative");
    if (every < 1) throw ConfigError("'snapshot_every' must be positive");
    double dt = cfg.real("dt");
    if (dt == 0.0) dt = 0.5 * max_stable_dt(g, infinite);

    if (cfg.str("initial").empty()) {
        const Rect d = s.domain();
        const double cx = 0.5 * (d.x0 + d.x1);
        const double cy = 0.5 * (d.y0 + d.y1);
        const double sig = 0.1 * std::min(d.x1 - d.x0, d.y1 - d.y0);
        set_density(g, [&](Vec2 c) {
            return std::exp(-((c.x - cx) * (c.x - cx) + (c.y - cy) * (c.y - cy)) / (2.0 * sig * sig));
        });
    } else {
        const expr::Expr p0 = expr::parse(cfg.str("initial"));
        set_density(g, [&](Vec2 c) {
            const double v = p0(c);
            if (!(v >= 0.0)) throw ConfigError("initial density must be non-negative");
            return v;
        });
    }

    detail::write_csv_header(out, cfg);
    out << "step,t,x,y,w,p\n";
    const auto snapshot = [&](long long step) {
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const Vec2 c = g.center(i, j);
                const std::size_t k = g.index(i, j);
                out << step << ',' << detail::num(g.t) << ',' << detail::num(c.x) << ','
                    << detail::num(c.y) << ',' << detail::num(g.w[k]) << ',' << detail::num(g.p[k])
                    << '\n';
            }
        }
    };
    snapshot(0);
    for (long long n = 1; n <= steps; ++n) {
        if (infinite) {
            step_infinite_rate_inplace(g, dt);
        } else {
            step_finite_rate_inplace(g, dt);
        }
        if (n % every == 0 || n == steps) snapshot(n);
    }
    return 0;
}

/// D from the surface pipeline against the planar channel formula along x.
inline int cmd_recover_channel(const Config& cfg, std::ostream& out) {
    const MediumParams med = detail::medium(cfg);
    const expr::Expr z1 = expr::parse(cfg.str("z1"));
    const expr::Expr z2 = expr::parse(cfg.str("z2"));
    if (!z1.independent_of(expr::Var::y) || !z2.independent_of(expr::Var::y)) {
        throw ConfigError("recover-channel needs profiles z1(x), z2(x) that do not depend on y");
    }
    const Rect dom = cfg.rect("domain");
    const SurfacePair s(ScalarField::from_expression(z1), ScalarField::from_expression(z2), dom);
    const FrameOptions opt = detail::frame_options(cfg);
    const long long n = cfg.integer("samples");
    if (n < 2) throw ConfigError("'samples' must be at least 2");
    const double y = 0.5 * (dom.y0 + dom.y1);
    const expr::Expr z1p = expr::differentiate(z1, expr::Var::x);
    const expr::Expr z2p = expr::differentiate(z2, expr::Var::x);

    detail::write_csv_header(out, cfg);
    out << "x,z1p,z2p,psi,D11,D12,D21,D22,R11,R22,max_abs_err,flags\n";
    using detail::num;
    for (long long k = 0; k < n; ++k) {
        const double x = lattice_coord(dom.x0, dom.x1, static_cast<int>(k), static_cast<int>(n));
        const FrameData fd = frame_for_surfaces(s, {x, y}, opt);
        const Mat2 d = to_cartesian(effective_tensor(fd, med));
        const Mat2 r = channel_recovery(z1, z2, x, med);
        out << num(x) << ',' << num(z1p(x, y)) << ',' << num(z2p(x, y)) << ',' << num(fd.psi) << ','
            << num(d.m11) << ',' << num(d.m12) << ',' << num(d.m21) << ',' << num(d.m22) << ','
            << num(r.m11) << ',' << num(r.m22) << ',' << num(max_abs_diff(d, r)) << ','
            << detail::flags(fd.degenerate_frame, fd.extreme_tilt) << '\n';
    }
    return 0;
}

inline int run_command(const Config& cfg, std::ostream& out) {
    switch (cfg.command()) {
        case Command::tensor: return cmd_tensor(cfg, out);
        case Command::planes: return cmd_planes(cfg, out);
        case Command::oracle: return cmd_oracle(cfg, out);
        case Command::mc: return cmd_mc(cfg, out);
        case Command::solve: return cmd_solve(cfg, out);
        case Command::recover_channel: return cmd_recover_channel(cfg, out);
    }
    return 1;
}

}  // namespace confdiff::cli
