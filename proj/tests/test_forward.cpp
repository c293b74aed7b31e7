#include <gtest/gtest.h>

#include <cmath>

#include "biplate/forward.hpp"
#include "biplate/parallel.hpp"

using namespace biplate;
using namespace biplate::forward;

namespace {

SourceField gaussian(std::size_t n, double w = 0.1, Vec3 c = {0.05, -0.02, 0.0}, double R_hat = 0.7) {
    return make_source_field({GaussianBump{c, w, 1.0}}, n, R_hat);
}

double max_diff(const CauchyTrace& a, const CauchyTrace& b, bool conj_b) {
    auto cj = [&](cplx z) { return conj_b ? std::conj(z) : z; };
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.u[i] - cj(b.u[i])));
        m = std::max(m, std::abs(a.lap_u[i] - cj(b.lap_u[i])));
        for (int c = 0; c < 3; ++c) {
            m = std::max(m, std::abs(a.grad_u[i][c] - cj(b.grad_u[i][c])));
            m = std::max(m, std::abs(a.grad_lap_u[i][c] - cj(b.grad_lap_u[i][c])));
        }
    }
    return m;
}

double max_abs(const CauchyTrace& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max({m, std::abs(a.u[i]), std::abs(a.lap_u[i])});
    return m;
}

}  // namespace

// --- kernel -----------------------------------------------------------------

TEST(Kernel, ReferenceValuesAtPi) {
    const auto g = green_kernel(kPi, cplx(1.0, 0.0));
    // mpmath, 30 digits
    EXPECT_NEAR(g.G.real(), -0.0132124586238308017233130474113, 1e-16);
    EXPECT_NEAR(g.lapG.real(), 0.0121178372867536411376568183912, 1e-16);
    EXPECT_NEAR(g.G.imag(), 0.0, 1e-17);
    EXPECT_NEAR(g.lapG.imag(), 0.0, 1e-17);
}

TEST(Kernel, ClosedForms) {
    const cplx I(0.0, 1.0);
    for (double k : {0.5, 3.0, 40.0}) {
        const cplx kap = kappa_of(k, 0.7);
        for (double r : {0.05, 0.3, 1.7}) {
            const auto g = green_kernel(r, kap);
            const cplx G = (std::exp(I * kap * r) - std::exp(-kap * r)) / (8.0 * kPi * kap * kap * r);
            const cplx L = -(std::exp(I * kap * r) + std::exp(-kap * r)) / (8.0 * kPi * r);
            EXPECT_LT(std::abs(g.G - G), 1e-13 * std::abs(G));
            EXPECT_LT(std::abs(g.lapG - L), 1e-13 * std::abs(L));
        }
    }
}

TEST(Kernel, RadialDerivativesAndLaplacianMatchFiniteDifferences) {
    for (double k : {1.0, 6.0}) {
        const cplx kap = kappa_of(k, 0.5);
        const double r = 0.8;
        double prev_err = 0.0;
        for (double dr : {1e-2, 5e-3}) {
            const auto m = green_kernel(r - dr, kap), c = green_kernel(r, kap), p = green_kernel(r + dr, kap);
            const cplx dG = (p.G - m.G) / (2.0 * dr);
            const cplx dL = (p.lapG - m.lapG) / (2.0 * dr);
            const cplx lap_fd = (p.G - 2.0 * c.G + m.G) / (dr * dr) + 2.0 / r * dG;
            EXPECT_LT(std::abs(dG - c.dG_dr), 1e-3 * std::abs(c.dG_dr));
            EXPECT_LT(std::abs(dL - c.dlapG_dr), 1e-3 * std::abs(c.dlapG_dr));
            // Two routes to lap G: closed form and radial finite differences.
            const double err = std::abs(lap_fd - c.lapG);
            EXPECT_LT(err, 1e-3 * std::abs(c.lapG));
            if (prev_err > 0.0) EXPECT_NEAR(prev_err / err, 4.0, 0.2);
            prev_err = err;
        }
    }
}

TEST(Kernel, BilaplacianEigenrelation) {
    // lap(lap G) = kappa^4 G away from the origin.
    const cplx kap = kappa_of(2.0, 0.5);
    const double r = 0.9, dr = 1e-3;
    const auto m = green_kernel(r - dr, kap), c = green_kernel(r, kap), p = green_kernel(r + dr, kap);
    const cplx lap2 = (p.lapG - 2.0 * c.lapG + m.lapG) / (dr * dr) + 2.0 / r * c.dlapG_dr;
    EXPECT_LT(std::abs(lap2 - std::pow(kap, 4) * c.G), 1e-5 * std::abs(std::pow(kap, 4) * c.G));
}

TEST(Kernel, DecayEnvelope) {
    const cplx kap = kappa_of(5.0, 0.5);
    const double rate = std::min(kap.real(), kap.imag());
    double prev = std::numeric_limits<double>::infinity();
    for (double r = 0.5; r < 40.0; r += 0.5) {
        const double bound = std::exp(-rate * r) / (4.0 * kPi * std::norm(kap) * r);
        const double g = std::abs(green_kernel(r, kap).G);
        EXPECT_LE(g, bound * (1.0 + 1e-12));
        EXPECT_LT(bound, prev);
        prev = bound;
    }
}

TEST(Kernel, RejectsNonPositiveRadius) {
    EXPECT_THROW(green_kernel(0.0, cplx(1.0, 0.0)), ValidationError);
    EXPECT_THROW(green_kernel(-1.0, cplx(1.0, 0.0)), ValidationError);
}

// --- synthesis ----------------------------------------------------------------

TEST(Synthesis, ZeroSourceGivesZeroTrace) {
    const auto f = make_source_field({}, 8, 0.7);
    const auto g = SphereGrid::fibonacci(1.0, 50);
    const auto t = synthesize_cauchy(f, g, 2.0, 0.5);
    EXPECT_EQ(max_abs(t), 0.0);
    EXPECT_EQ(field_at(f, {0.9, 0.0, 0.0}, 2.0, 0.5), cplx(0.0, 0.0));
}

TEST(Synthesis, RealitySymmetry) {
    const auto f = gaussian(20);
    const auto g = SphereGrid::fibonacci(1.0, 100);
    for (double k : {0.5, 2.0, 9.0}) {
        const auto plus = synthesize_cauchy(f, g, k, 0.5);
        const auto minus = synthesize_cauchy(f, g, -k, 0.5);
        EXPECT_LT(max_diff(minus, plus, true), 1e-12 * std::max(1.0, max_abs(plus)));
    }
}

TEST(Synthesis, Linearity) {
    const auto g = SphereGrid::fibonacci(1.0, 80);
    const auto f1 = make_source_field({GaussianBump{{0.1, 0.0, 0.0}, 0.1, 1.0}}, 16, 0.7);
    const auto f2 = make_source_field({PolynomialBump{{-0.2, 0.1, 0.0}, 0.3, 3, 1.0}}, 16, 0.7);
    const double a = 2.5, b = -0.75;
    std::vector<double> v(f1.values().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * f1.values()[i] + b * f2.values()[i];
    const SourceField fab(0.7, 16, v, 3);
    const auto t1 = synthesize_cauchy(f1, g, 3.0, 0.4);
    const auto t2 = synthesize_cauchy(f2, g, 3.0, 0.4);
    auto tc = synthesize_cauchy(fab, g, 3.0, 0.4);
    auto comb = t1;
    for (std::size_t i = 0; i < g.size(); ++i) {
        comb.u[i] = a * t1.u[i] + b * t2.u[i];
        comb.lap_u[i] = a * t1.lap_u[i] + b * t2.lap_u[i];
        for (int c = 0; c < 3; ++c) {
            comb.grad_u[i][c] = a * t1.grad_u[i][c] + b * t2.grad_u[i][c];
            comb.grad_lap_u[i][c] = a * t1.grad_lap_u[i][c] + b * t2.grad_lap_u[i][c];
        }
    }
    EXPECT_LT(max_diff(tc, comb, false), 1e-13 * max_abs(comb));
}

TEST(Synthesis, FieldAtMatchesTraceExactly) {
    const auto f = gaussian(16);
    const auto g = SphereGrid::fibonacci(1.0, 40);
    const auto t = synthesize_cauchy(f, g, 2.0, 0.5);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(field_at(f, g.points()[i], 2.0, 0.5), t.u[i]);
}

TEST(Synthesis, GradientMatchesFiniteDifferenceOfFieldAt) {
    const auto f = gaussian(16);
    const Vec3 x{0.6, 0.5, -0.3};
    const double k = 3.0, s = 0.5, h = 1e-4;
    const auto fv = field_values_at(f, x, DampedWavenumber::make(k, s));
    for (int c = 0; c < 3; ++c) {
        Vec3 xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        const cplx fd = (field_at(f, xp, k, s) - field_at(f, xm, k, s)) / (2.0 * h);
        EXPECT_LT(std::abs(fd - fv.grad_u[c]), 1e-6 * std::abs(fv.u));
    }
}

TEST(Synthesis, SelfConvergenceAtAPoint) {
    const Vec3 x{0.9, 0.0, 0.0};
    const cplx a = field_at(gaussian(40), x, 2.0, 0.5);
    const cplx b = field_at(gaussian(56), x, 2.0, 0.5);
    EXPECT_LT(std::abs(a - b), 1e-6 * std::abs(b));
}

TEST(Synthesis, ConvergesAtLeastQuadraticallyUnderRefinement) {
    const Vec3 x{0.9, 0.1, 0.0};
    const double w = 0.12;
    const cplx fine = field_at(gaussian(96, w), x, 2.0, 0.5);
    const double e1 = std::abs(field_at(gaussian(10, w), x, 2.0, 0.5) - fine);
    const double e2 = std::abs(field_at(gaussian(20, w), x, 2.0, 0.5) - fine);
    EXPECT_GE(std::log2(e1 / e2), 2.0);
}

TEST(Synthesis, RejectsPointsInsideSupport) {
    const auto f = gaussian(8);
    EXPECT_THROW(field_at(f, {0.5, 0.0, 0.0}, 1.0, 0.0), ValidationError);
    EXPECT_THROW(synthesize_cauchy(f, SphereGrid::fibonacci(0.6, 10), 1.0, 0.0), ValidationError);
}

TEST(Synthesis, ParallelAndSerialAgree) {
    const auto f = gaussian(24);
    const auto g = SphereGrid::fibonacci(1.0, 64);
    set_thread_count(1);
    const auto a = synthesize_cauchy(f, g, 4.0, 0.5);
    set_thread_count(4);
    const auto b = synthesize_cauchy(f, g, 4.0, 0.5);
    set_thread_count(0);
    EXPECT_LE(max_diff(a, b, false), 1e-13 * max_abs(a));
}

TEST(Synthesis, ExponentialDecayAlongARay) {
    const auto f = gaussian(16);
    const double k = 2.0, s = 0.5;
    std::vector<double> r, logu;
    double prev = std::numeric_limits<double>::infinity();
    for (double t = 1.0; t <= 12.0; t += 0.25) {
        const double a = std::abs(field_at(f, {t / std::sqrt(2.0), t / std::sqrt(2.0), 0.0}, k, s));
        EXPECT_LT(a, prev);
        prev = a;
        r.push_back(t);
        logu.push_back(std::log(a));
    }
    const double slope = (logu.back() - logu.front()) / (r.back() - r.front());
    EXPECT_LT(slope, 0.0);
}

// --- residual -----------------------------------------------------------------

TEST(Residual, ZeroSource) {
    const auto f = make_source_field({}, 8, 0.5);
    const std::vector<Vec3> c{{0.9, 0.0, 0.0}};
    EXPECT_EQ(residual_check(f, 2.0, 0.5, c, 0.02, 1.5).max_residual, 0.0);
}

TEST(Residual, SecondOrderAndPinnedBound) {
    const auto f = make_source_field({GaussianBump{{0.0, 0.0, 0.0}, 0.08, 1.0}}, 24, 0.5);
    const std::vector<Vec3> c{{0.9, 0.1, -0.2}, {-0.3, 0.85, 0.4}};
    const double r1 = residual_check(f, 2.0, 0.5, c, 0.02, 1.5).normalized();
    const auto fine = residual_check(f, 2.0, 0.5, c, 0.01, 1.5);
    EXPECT_NEAR(r1 / fine.normalized(), 4.0, 0.4);
    EXPECT_LT(fine.normalized(), 1e-2);
    EXPECT_GT(fine.max_abs_u, 0.0);
}

TEST(Residual, RejectsStencilOutsideAnnulus) {
    const auto f = make_source_field({GaussianBump{{0.0, 0.0, 0.0}, 0.08, 1.0}}, 8, 0.5);
    const std::vector<Vec3> inner{{0.55, 0.0, 0.0}}, outer{{1.45, 0.0, 0.0}};
    EXPECT_THROW(residual_check(f, 2.0, 0.5, inner, 0.02, 1.5), ValidationError);
    EXPECT_THROW(residual_check(f, 2.0, 0.5, outer, 0.02, 1.5), ValidationError);
}

// --- resolvent probes -----------------------------------------------------------

TEST(Resolvent, ZeroSourceIsDegenerate) {
    const auto f = make_source_field({}, 8, 0.7);
    const auto r = resolvent_growth_probe(f, FrequencyGrid::uniform(0.5, 5.0, 4), 0.5, SphereGrid::fibonacci(1.0, 20));
    EXPECT_TRUE(r.degenerate);
    for (double n : r.norms) EXPECT_EQ(n, 0.0);
}

TEST(Resolvent, EnvelopeBoundsEveryNodeAndGrowsWithSigma) {
    const auto f = gaussian(16);
    const auto nodes = FrequencyGrid::uniform(0.5, 50.0, 24);
    const auto g = SphereGrid::fibonacci(1.0, 200);
    const auto a = resolvent_growth_probe(f, nodes, 0.5, g);
    const auto b = resolvent_growth_probe(f, nodes, 1.0, g);
    ASSERT_FALSE(a.degenerate);
    for (std::size_t i = 0; i < a.k.size(); ++i) {
        EXPECT_LE(std::log(a.norms[i]), a.envelope(a.k[i]) + 1e-12);
        EXPECT_LE(std::log(b.norms[i]), b.envelope(b.k[i]) + 1e-12);
    }
    EXPECT_DOUBLE_EQ(a.c1, 2.0 * 1.0 * 1.5);
    EXPECT_GT(b.c1, a.c1);
}

// --- analyticity ----------------------------------------------------------------

TEST(Analyticity, ZeroSource) {
    const auto f = make_source_field({}, 8, 0.12 * gaussian_support_factor());
    EXPECT_EQ(analyticity_probe(f, {1.0, 0.0, 0.0}, {}, 0.5, 64, 0.5, 0.05).magnitude, 0.0);
}

TEST(Analyticity, ContourIntegralShrinksUnderRefinement) {
    const double w = 0.12;
    const auto f = make_source_field({GaussianBump{{0.0, 0.0, 0.0}, w, 1.0}}, 24, w * gaussian_support_factor());
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {32u, 64u, 128u, 256u}) {
        const auto r = analyticity_probe(f, {1.0, 0.0, 0.0}, {}, 0.5, n, 0.5, 0.05);
        const double rel = r.magnitude / (r.max_abs_u * r.perimeter);
        EXPECT_LT(rel, prev);
        prev = rel;
    }
}

TEST(Analyticity, RejectsRectanglesTouchingTheSlab) {
    const auto f = gaussian(8);
    EXPECT_THROW(analyticity_probe(f, {1.0, 0.0, 0.0}, {1.0, 2.0, -0.05, 0.02}, 0.5, 64, 0.5, 0.05), ValidationError);
    EXPECT_THROW(analyticity_probe(f, {1.0, 0.0, 0.0}, {0.5, 2.0, -0.02, 0.02}, 0.5, 64, 0.5, 0.05), ValidationError);
}
