#pragma once

// Frequency-domain forward solver built on the explicit biharmonic Green's
// function, plus empirical probes of the resolvent (analyticity, growth).

#include <span>
#include <vector>

#include "biplate/core.hpp"

namespace biplate::forward {

/// Kernel G(r) = (e^{i kappa r} - e^{-kappa r}) / (8 pi kappa^2 r), its
/// Laplacian and the radial derivatives of both.
struct GreenKernelValues {
    double r = 0.0;
    cplx G;
    cplx dG_dr;
    cplx lapG;
    cplx dlapG_dr;
};

GreenKernelValues green_kernel(double r, cplx kappa);

/// Point values of u, grad u, lap u and grad lap u produced by the source.
struct FieldValues {
    cplx u;
    CVec3 grad_u{};
    cplx lap_u;
    CVec3 grad_lap_u{};
};

/// Midpoint-rule convolution of the kernel with f at a point outside the
/// support ball.
FieldValues field_values_at(const SourceField& f, const Vec3& x, const DampedWavenumber& wave);

cplx field_at(const SourceField& f, const Vec3& x, cplx k, double sigma);
inline cplx field_at(const SourceField& f, const Vec3& x, double k, double sigma) {
    return field_at(f, x, cplx(k, 0.0), sigma);
}

/// The four Cauchy traces on the sphere at a real frequency k.
CauchyTrace synthesize_cauchy(const SourceField& f, const SphereGrid& grid, double k, double sigma);

/// One trace per node of the frequency grid.
CauchyDataset synthesize_dataset(const SourceField& f, const SphereGrid& grid, const FrequencyGrid& frequencies,
                                 double sigma, Provenance provenance = {});

struct ResidualReport {
    double max_residual = 0.0;
    double max_abs_u = 0.0;

    double normalized() const { return max_abs_u > 0.0 ? max_residual / max_abs_u : 0.0; }
};

/// max |lap_h lap_h u - (k^2 + i k sigma) u| over stencil centres in the
/// source-free annulus R^ + 3h < |x| < outer_radius - 3h.
ResidualReport residual_check(const SourceField& f, double k, double sigma, std::span<const Vec3> centres,
                              double h_fd, double outer_radius);

/// Growth envelope log N(k) <= c0 + c1 sqrt(k) + 4 log k with
/// c1 = 2 R (sigma + 1) and c0 the smallest constant that bounds every node.
struct ResolventProbeReport {
    std::vector<double> k;
    std::vector<double> norms;
    double c0 = 0.0;
    double c1 = 0.0;
    bool degenerate = false;

    /// log of C0 k^4 exp(c1 sqrt(k)), with C0 = exp(c0) fitted to the data.
    double envelope(double kk) const;
};

ResolventProbeReport resolvent_growth_probe(const SourceField& f, const FrequencyGrid& nodes, double sigma,
                                            const SphereGrid& grid);

/// Closed rectangle [k_lo, k_hi] x [im_lo, im_hi] in the complex k plane.
struct ContourRectangle {
    double k_lo = 1.0;
    double k_hi = 2.0;
    double im_lo = -0.02;
    double im_hi = 0.02;

    double perimeter() const { return 2.0 * ((k_hi - k_lo) + (im_hi - im_lo)); }
};

struct ContourReport {
    double magnitude = 0.0;
    double max_abs_u = 0.0;
    double perimeter = 0.0;
    std::size_t nodes = 0;
};

/// |closed contour integral of u(x, k) dk| by the trapezoid rule on each side.
/// The rectangle must lie strictly inside the slab (delta, inf) x (-d, d).
ContourReport analyticity_probe(const SourceField& f, const Vec3& x, const ContourRectangle& rect, double sigma,
                                std::size_t n_contour, double delta, double d);

}  // namespace biplate::forward
