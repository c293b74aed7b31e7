#include "biplate/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "biplate/parallel.hpp"
#include "kernel_sums.hpp"

namespace biplate::forward {

namespace {

constexpr cplx kI{0.0, 1.0};

// Per-frequency constants of the kernel.
struct Kernel {
    double re, im;
    cplx kappa;
    cplx ikappa;
    cplx g_scale;    // 1 / (8 pi kappa^2)
    double l_scale;  // -1 / (8 pi)

    explicit Kernel(cplx kap)
        : re(kap.real()), im(kap.imag()), kappa(kap), ikappa(kI * kap),
          g_scale(1.0 / (8.0 * kPi * kap * kap)), l_scale(-1.0 / (8.0 * kPi)) {}

    GreenKernelValues eval(double r) const {
        const double inv_r = 1.0 / r;
        const double decay_a = std::exp(-im * r);
        const double decay_b = std::exp(-re * r);
        const cplx ea(decay_a * std::cos(re * r), decay_a * std::sin(re * r));  // e^{i kappa r}
        const cplx eb(decay_b * std::cos(im * r), -decay_b * std::sin(im * r));  // e^{-kappa r}
        const cplx pa = ikappa * r - 1.0;
        const cplx pb = kappa * r + 1.0;
        GreenKernelValues v;
        v.r = r;
        v.G = g_scale * (ea - eb) * inv_r;
        v.dG_dr = g_scale * (ea * pa + eb * pb) * (inv_r * inv_r);
        v.lapG = l_scale * (ea + eb) * inv_r;
        v.dlapG_dr = l_scale * (ea * pa - eb * pb) * (inv_r * inv_r);
        return v;
    }
};

}  // namespace

GreenKernelValues green_kernel(double r, cplx kappa) {
    if (!(r > 0.0)) throw ValidationError("green_kernel: r must be positive");
    return Kernel(kappa).eval(r);
}

namespace {

// Active sources in structure-of-arrays layout for the vectorized sums.
struct SourceBatch {
    std::vector<double> x, y, z, w;

    explicit SourceBatch(const SourceField& f) {
        const auto& pts = f.active_points();
        x.reserve(pts.size());
        y.reserve(pts.size());
        z.reserve(pts.size());
        for (const auto& p : pts) {
            x.push_back(p[0]);
            y.push_back(p[1]);
            z.push_back(p[2]);
        }
        w = f.active_weights();
    }
};

FieldValues batch_values(const SourceBatch& src, const Vec3& x, const DampedWavenumber& wave) {
    const Kernel kernel(wave.kappa);
    const double px[3] = {x[0], x[1], x[2]};
    const auto s = detail::kernel_sums(src.x.data(), src.y.data(), src.z.data(), src.w.data(), src.w.size(), px,
                                       kernel.re, kernel.im);
    FieldValues out;
    out.u = kernel.g_scale * cplx(s.g[0], s.g[1]);
    out.lap_u = kernel.l_scale * cplx(s.l[0], s.l[1]);
    for (int a = 0; a < 3; ++a) {
        out.grad_u[a] = kernel.g_scale * cplx(s.dg[a][0], s.dg[a][1]);
        out.grad_lap_u[a] = kernel.l_scale * cplx(s.dl[a][0], s.dl[a][1]);
    }
    return out;
}

}  // namespace

FieldValues field_values_at(const SourceField& f, const Vec3& x, const DampedWavenumber& wave) {
    if (!(norm(x) > f.support_radius())) throw ValidationError("field_at: evaluation point must satisfy |x| > R^");
    return batch_values(SourceBatch(f), x, wave);
}

cplx field_at(const SourceField& f, const Vec3& x, cplx k, double sigma) {
    return field_values_at(f, x, DampedWavenumber::make(k, sigma)).u;
}

CauchyTrace synthesize_cauchy(const SourceField& f, const SphereGrid& grid, double k, double sigma) {
    if (!(f.support_radius() < grid.radius()))
        throw ValidationError("synthesize_cauchy: support radius must be smaller than the sphere radius");
    const auto wave = DampedWavenumber::make(k, sigma);
    const SourceBatch src(f);
    CauchyTrace trace = CauchyTrace::zeros(k, grid.size());
    parallel_for(grid.size(), [&](std::size_t j) {
        const FieldValues v = batch_values(src, grid.points()[j], wave);
        trace.u[j] = v.u;
        trace.grad_u[j] = v.grad_u;
        trace.lap_u[j] = v.lap_u;
        trace.grad_lap_u[j] = v.grad_lap_u;
    });
    return trace;
}

CauchyDataset synthesize_dataset(const SourceField& f, const SphereGrid& grid, const FrequencyGrid& frequencies,
                                 double sigma, Provenance provenance) {
    CauchyDataset ds{grid, frequencies, {}, sigma, std::move(provenance)};
    ds.traces.reserve(frequencies.size());
    for (double k : frequencies.nodes()) ds.traces.push_back(synthesize_cauchy(f, grid, k, sigma));
    return ds;
}

ResidualReport residual_check(const SourceField& f, double k, double sigma, std::span<const Vec3> centres,
                              double h_fd, double outer_radius) {
    if (!(h_fd > 0.0)) throw ValidationError("residual_check: h_fd must be positive");
    const double margin = 3.0 * h_fd;
    for (const auto& c : centres) {
        const double r = norm(c);
        if (!(r > f.support_radius() + margin && r < outer_radius - margin))
            throw ValidationError("residual_check: stencil centre violates the annulus margin");
    }
    const auto wave = DampedWavenumber::make(k, sigma);
    const cplx k4 = wave.kappa * wave.kappa * wave.kappa * wave.kappa;

    const SourceBatch src(f);
    ResidualReport report;
    for (const auto& c : centres) {
        // Field on the offsets used by the 7-point Laplacian applied twice.
        auto u_at = [&](int a, int b, int cc) {
            const Vec3 x{c[0] + a * h_fd, c[1] + b * h_fd, c[2] + cc * h_fd};
            return batch_values(src, x, wave).u;
        };
        const cplx u0 = u_at(0, 0, 0);
        const int e[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        auto lap_at = [&](int a, int b, int cc, cplx centre) {
            cplx s = -6.0 * centre;
            for (const auto& d : e) {
                s += u_at(a + d[0], b + d[1], cc + d[2]);
                s += u_at(a - d[0], b - d[1], cc - d[2]);
            }
            return s / (h_fd * h_fd);
        };
        cplx bilap = -6.0 * lap_at(0, 0, 0, u0);
        for (const auto& d : e) {
            for (int sgn : {1, -1}) {
                const cplx un = u_at(sgn * d[0], sgn * d[1], sgn * d[2]);
                bilap += lap_at(sgn * d[0], sgn * d[1], sgn * d[2], un);
            }
        }
        bilap /= (h_fd * h_fd);
        report.max_residual = std::max(report.max_residual, std::abs(bilap - k4 * u0));
        report.max_abs_u = std::max(report.max_abs_u, std::abs(u0));
    }
    return report;
}

double ResolventProbeReport::envelope(double kk) const { return c0 + c1 * std::sqrt(kk) + 4.0 * std::log(kk); }

ResolventProbeReport resolvent_growth_probe(const SourceField& f, const FrequencyGrid& nodes, double sigma,
                                            const SphereGrid& grid) {
    ResolventProbeReport rep;
    rep.k = nodes.nodes();
    rep.c1 = 2.0 * grid.radius() * (sigma + 1.0);
    rep.norms.reserve(rep.k.size());
    for (double k : rep.k) rep.norms.push_back(boundary_norm_sq(synthesize_cauchy(f, grid, k, sigma), grid));
    double c0 = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rep.k.size(); ++i) {
        if (rep.norms[i] <= 0.0) continue;
        const double k = rep.k[i];
        c0 = std::max(c0, std::log(rep.norms[i]) - rep.c1 * std::sqrt(k) - 4.0 * std::log(k));
    }
    rep.degenerate = !std::isfinite(c0);
    rep.c0 = rep.degenerate ? std::numeric_limits<double>::quiet_NaN() : c0;
    return rep;
}

ContourReport analyticity_probe(const SourceField& f, const Vec3& x, const ContourRectangle& rect, double sigma,
                                std::size_t n_contour, double delta, double d) {
    if (!(rect.k_lo > delta && rect.k_hi > rect.k_lo && rect.im_lo > -d && rect.im_hi < d && rect.im_hi > rect.im_lo))
        throw ValidationError("analyticity_probe: rectangle must lie strictly inside the slab (delta, inf) x (-d, d)");
    if (n_contour < 4) throw ValidationError("analyticity_probe: need at least four contour nodes");

    const cplx corners[5] = {{rect.k_lo, rect.im_lo},
                             {rect.k_hi, rect.im_lo},
                             {rect.k_hi, rect.im_hi},
                             {rect.k_lo, rect.im_hi},
                             {rect.k_lo, rect.im_lo}};
    const double perimeter = rect.perimeter();
    ContourReport rep;
    rep.perimeter = perimeter;
    cplx total{};
    for (int s = 0; s < 4; ++s) {
        const cplx a = corners[s], b = corners[s + 1];
        const double len = std::abs(b - a);
        const auto m = static_cast<std::size_t>(
            std::max(1.0, std::round(static_cast<double>(n_contour) * len / perimeter)));
        const cplx step = (b - a) / static_cast<double>(m);
        std::vector<cplx> vals(m + 1);
        parallel_for(m + 1, [&](std::size_t i) { vals[i] = field_at(f, x, a + static_cast<double>(i) * step, sigma); });
        cplx side{};
        for (std::size_t i = 0; i <= m; ++i) {
            const double c = (i == 0 || i == m) ? 0.5 : 1.0;
            side += c * vals[i];
            rep.max_abs_u = std::max(rep.max_abs_u, std::abs(vals[i]));
        }
        total += side * step;
        rep.nodes += m;
    }
    rep.magnitude = std::abs(total);
    return rep;
}

}  // namespace biplate::forward
