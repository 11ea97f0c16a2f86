#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "confdiff/geometry.hpp"
#include "confdiff/oracle.hpp"
#include "confdiff/quadrature.hpp"
#include "confdiff/tensor.hpp"
#include "support.hpp"

using namespace confdiff;
using testing_support::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

double max_entry_error(const Mat2& a, const Mat2& b) { return max_abs_diff(a, b); }

McJob slab_job(std::int64_t particles, std::int64_t steps) {
    McJob job;
    job.n_particles = particles;
    job.n_steps = steps;
    job.dt = 1e-3;
    job.seed = 2024;
    return job;
}

}  // namespace

TEST(GaussLegendre, FiveNodes) {
    const GaussLegendre gl(5);
    ASSERT_EQ(gl.size(), 5u);
    // reference values from the closed-form roots of P5
    const double x1 = 0.90617984593866399280, x2 = 0.53846931010568309104;
    const double w1 = 0.23692688505618908751, w2 = 0.47862867049936646804, w0 = 0.56888888888888888889;
    std::vector<double> n = gl.nodes(), w = gl.weights();
    std::vector<std::pair<double, double>> nw;
    for (std::size_t i = 0; i < n.size(); ++i) nw.emplace_back(n[i], w[i]);
    std::sort(nw.begin(), nw.end());
    const double xs[5] = {-x1, -x2, 0.0, x2, x1};
    const double ws[5] = {w1, w2, w0, w2, w1};
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(nw[i].first, xs[i], 1e-15);
        EXPECT_NEAR(nw[i].second, ws[i], 1e-15);
    }
}

TEST(GaussLegendre, ExactForPolynomialsUpToDegree2nMinus1) {
    for (int n : {1, 2, 3, 8, 17, 64, 128, 256}) {
        const GaussLegendre gl(n);
        double wsum = 0.0;
        for (double w : gl.weights()) wsum += w;
        EXPECT_NEAR(wsum, 2.0, 1e-13);
        const int deg = std::min(2 * n - 1, 40);
        for (int k = 0; k <= deg; ++k) {
            const double exact = (std::pow(3.0, k + 1) - std::pow(-1.0, k + 1)) / (k + 1);
            const double got = gl.integrate([k](double x) { return std::pow(x, k); }, -1.0, 3.0);
            EXPECT_NEAR(got, exact, 1e-12 * std::max(1.0, std::abs(exact))) << "n=" << n << " k=" << k;
        }
    }
    EXPECT_THROW(GaussLegendre(0), ConfigError);
}

TEST(Quadrature, UnitSlopeWedge) {
    WedgeQuadratureJob job;
    job.cfg = PlaneConfig::from_directions({0, 0, -1}, {-1, 0, 1});
    const Mat2 d = quadrature_tensor(job);
    EXPECT_LE(max_entry_error(d, Mat2::diag(kPi / 4, 1.0)), 1e-6);
}

TEST(Quadrature, TiltedWedgeMatchesIndependentReference) {
    // extended-precision reference for psi = 0.5, m1 = -1, m2 = 2 at (1, 0), D0 = 1
    const Mat2 reference{0.6308489603971796, -0.15122255130815968, -0.073215529607801025,
                         0.78770185029227585};
    WedgeQuadratureJob job;
    job.cfg = wedge_planes(-1.0, 2.0, 0.5);
    const Mat2 q = quadrature_tensor(job);
    EXPECT_LE(max_entry_error(q, reference), 1e-6);
    const Mat2 closed = effective_tensor(frame_for_planes(job.cfg), MediumParams::make(1.0)).coeffs;
    EXPECT_LE(max_entry_error(closed, reference), 1e-14);
}

TEST(Quadrature, ParallelPlanes) {
    WedgeQuadratureJob job;
    job.cfg = Slab::tilted(1.0).planes();
    job.med = MediumParams::make(2.0);
    const Mat2 d = quadrature_tensor(job);
    EXPECT_LE(max_entry_error(d, Mat2::diag(1.0, 2.0)), 1e-6);
}

TEST(Quadrature, MatchesClosedFormOnRandomWedges) {
    Rng rng(21);
    for (int n = 0; n < 40; ++n) {
        WedgeQuadratureJob job;
        job.cfg = wedge_planes(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-1.4, 1.4),
                               rng.uniform(0, 2 * kPi));
        job.med = MediumParams::make(rng.uniform(0.5, 2.0));
        const Mat2 closed = effective_tensor(frame_for_planes(job.cfg), job.med).coeffs;
        EXPECT_LE(max_entry_error(quadrature_tensor(job), closed), 1e-6 * job.med.d0);
        job.points = 256;
        const Mat2 fine = quadrature_tensor(job);
        job.points = 128;
        EXPECT_LE(max_entry_error(quadrature_tensor(job), fine), 1e-6 * job.med.d0);
    }
}

TEST(Quadrature, TensorIsIndependentOfEvaluationPoint) {
    WedgeQuadratureJob job;
    job.cfg = wedge_planes(-2.0, 3.0, -0.9, 0.4);
    const Mat2 a = quadrature_tensor(job);
    job.eval_point = {2.5, -1.5};
    EXPECT_LE(max_entry_error(quadrature_tensor(job), a), 1e-6);
}

TEST(Quadrature, GlobalRouteMatchesFrameRoute) {
    Rng rng(22);
    for (int n = 0; n < 20; ++n) {
        const double m1 = rng.uniform(-5, 0), m2 = rng.uniform(0.5, 5);
        const PlaneConfig cfg = wedge_planes(m1, m2, rng.uniform(-1.2, 1.2), rng.uniform(0, 2 * kPi));
        const PlaneFrame f = frame_for_planes(cfg);
        const Vec2 xh{f.x.x, f.x.y}, yh{f.y.x, f.y.y};
        const EffectiveTensor t = effective_tensor(f, MediumParams::make(1.0));
        const Mat2 b = Mat2::from_columns(xh, yh);
        const Mat2 expected = b * t.coeffs * transpose(b);
        const Mat2 global = quadrature_tensor_global(cfg, 1.3 * xh + 0.2 * yh);
        EXPECT_LE(max_entry_error(global, expected), 1e-6);
    }
}

TEST(Quadrature, Errors) {
    WedgeQuadratureJob job;
    job.cfg = PlaneConfig::from_directions({0, 0, -1}, {-1, 0, 1});
    job.eval_point = {0.0, 0.3};
    EXPECT_THROW(quadrature_tensor(job), NumericalError);
    job.eval_point = {1.0, 0.0};
    job.fd_step = 0.0;
    EXPECT_THROW(quadrature_tensor(job), ConfigError);
    job.fd_step = 1e-5;
    job.cfg = PlaneConfig::make({0, -1, 0}, {0, 1, 0});
    EXPECT_THROW(quadrature_tensor(job), DegenerateError);
    EXPECT_THROW(quadrature_tensor_global(Slab{}.planes(), {0.5, 0.5}), ConfigError);
}

TEST(SplitMix64, ReferenceOutputs) {
    SplitMix64 g(0);
    EXPECT_EQ(g(), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(g(), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(g(), 0x06c45d188009454fULL);
    SplitMix64 a = particle_stream(7, 3), b = particle_stream(7, 3), c = particle_stream(7, 4);
    const auto first = a();
    EXPECT_EQ(first, b());
    EXPECT_NE(first, c());
}

TEST(Reflection, ExactOnAPlane) {
    const Slab slab{{0.0, 0.0}, 1.0};
    detail::WalkerTally tally;
    Vec3 q{0.0, 0.0, 0.5};
    ASSERT_TRUE(detail::reflected_step(slab, q, {0.1, -0.2, 0.7}, tally));
    EXPECT_NEAR(q.x, 0.1, 1e-15);
    EXPECT_NEAR(q.y, -0.2, 1e-15);
    EXPECT_NEAR(q.z, 0.8, 1e-12);
    EXPECT_EQ(tally.bounces, 1);

    // tilted wall z = x: the mirror image of the end point across the plane
    const Slab tilted{{1.0, 0.0}, 1.0};
    Vec3 r{0.0, 0.0, 0.5};
    const Vec3 d{0.9, 0.0, -0.1};
    ASSERT_TRUE(detail::reflected_step(tilted, r, d, tally));
    const Vec3 end{0.9, 0.0, 0.4};
    const Vec3 n = Vec3{1.0, 0.0, -1.0} / std::sqrt(2.0);
    const Vec3 mirror = end - 2.0 * dot(end, n) * n;
    EXPECT_NEAR(r.x, mirror.x, 1e-12);
    EXPECT_NEAR(r.z, mirror.z, 1e-12);
    EXPECT_EQ(tally.double_contact, 0);
}

TEST(Reflection, StaysBetweenCurvedWalls) {
    const SurfacePair s(ScalarField::from_text("cos(x)"), ScalarField::from_text("cos(y)+5/2"),
                        {-50, 50, -50, 50});
    const SurfaceWalls walls(s);
    Rng rng(23);
    detail::WalkerTally tally;
    Vec3 q{1.0, 1.0, 1.5};
    for (int k = 0; k < 20000; ++k) {
        const Vec3 d{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
        detail::reflected_step(walls, q, d, tally);
        const Vec2 p{q.x, q.y};
        ASSERT_GE(q.z, walls.lower(p));
        ASSERT_LE(q.z, walls.upper(p));
    }
    EXPECT_GT(tally.bounces, 100);
    EXPECT_LT(tally.aborted, 20);
}

TEST(MonteCarlo, FlatSlabIsIsotropic) {
    const McResult r = mc_projected_tensor(Slab::tilted(0.0), slab_job(20000, 2000));
    const Mat2 e = r.estimate, se = r.stderr_;
    EXPECT_NEAR(e.m11, 1.0, 3 * se.m11);
    EXPECT_NEAR(e.m22, 1.0, 3 * se.m22);
    EXPECT_NEAR(e.m12, 0.0, 3 * se.m12);
    EXPECT_EQ(e.m12, e.m21);
    EXPECT_EQ(r.steps, 20000LL * 2000);
    EXPECT_EQ(r.aborted_steps, 0);
}

TEST(MonteCarlo, TiltedSlabs) {
    for (double mu : {1.0, 2.0}) {
        const McResult r = mc_projected_tensor(Slab::tilted(mu, 0.7), slab_job(20000, 5000));
        EXPECT_NEAR(r.estimate.m11, 1.0 / (1.0 + mu * mu), 0.03 / (1.0 + mu * mu)) << "mu=" << mu;
        EXPECT_NEAR(r.estimate.m22, 1.0, 0.03) << "mu=" << mu;
        EXPECT_NEAR(r.xhat.x, std::cos(0.7), 1e-12);
        EXPECT_NEAR(r.xhat.y, std::sin(0.7), 1e-12);
        EXPECT_GT(r.bounces, 0);
    }
}

TEST(MonteCarlo, StandardErrorShrinksWithParticles) {
    const Slab slab = Slab::tilted(1.0);
    const McResult a = mc_projected_tensor(slab, slab_job(4000, 500));
    const McResult b = mc_projected_tensor(slab, slab_job(16000, 500));
    const double ratio11 = a.stderr_.m11 / b.stderr_.m11;
    const double ratio22 = a.stderr_.m22 / b.stderr_.m22;
    EXPECT_GE(ratio11, 1.6);
    EXPECT_LE(ratio11, 2.4);
    EXPECT_GE(ratio22, 1.6);
    EXPECT_LE(ratio22, 2.4);
}

TEST(MonteCarlo, ResultDoesNotDependOnWorkers) {
    const Slab slab = Slab::tilted(1.5, 0.3);
    McJob job = slab_job(3000, 300);
    const McResult a = mc_projected_tensor(slab, job);
    job.workers = 3;
    const McResult b = mc_projected_tensor(slab, job);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.stderr_, b.stderr_);
    EXPECT_EQ(a.bounces, b.bounces);
    job.seed += 1;
    EXPECT_NE(mc_projected_tensor(slab, job).estimate, a.estimate);
}

TEST(MonteCarlo, CurvedSurfacesReportOnly) {
    const SurfacePair s(ScalarField::from_text("cos(x)"), ScalarField::from_text("cos(y)+5/2"),
                        {-50, 50, -50, 50});
    McJob job = slab_job(500, 500);
    job.start = {1.0, 1.0, 1.5};
    const McResult r = mc_projected_tensor(s, job);
    EXPECT_GT(r.estimate.m11, 0.0);
    EXPECT_GT(r.estimate.m22, 0.0);
    EXPECT_LT(r.estimate.m11, 1.2);
    EXPECT_LT(r.estimate.m22, 1.2);
    EXPECT_GT(r.bounces, 0);
}

TEST(MonteCarlo, Errors) {
    const Slab slab{};
    McJob job = slab_job(100, 10);
    job.start = {0.0, 0.0, 1.5};
    EXPECT_THROW(mc_projected_tensor(slab, job), ConfigError);
    job.start = {0.0, 0.0, 0.5};
    job.dt = -1.0;
    EXPECT_THROW(mc_projected_tensor(slab, job), ConfigError);
    job.dt = 0.5;  // steps comparable to the gap touch both walls
    EXPECT_THROW(mc_projected_tensor(slab, job), NumericalError);
    job.dt = 1e-3;
    job.n_particles = 1;
    EXPECT_THROW(mc_projected_tensor(slab, job), ConfigError);
}
