#pragma once

// Domain types shared by every module: the damped wavenumber map, sphere and
// frequency grids with quadrature weights, sampled sources, Cauchy traces.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace biplate {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using CVec3 = std::array<cplx, 3>;

inline constexpr double kPi = 3.14159265358979323846;

// Input or shape validation failure.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

// ---------------------------------------------------------------------------
// Complex wavenumber
// ---------------------------------------------------------------------------

/// Fourth root of k^2 + i k sigma lying in the closed first quadrant.
///
/// For Re k > 0 this is the principal root. For Re k < 0 it is
/// i * conj(kappa(-conj(k))), which keeps the outgoing kernel and gives
/// u(x, -k) = conj(u(x, k)) for real k and real sources.
cplx kappa_of(cplx k, double sigma);
inline cplx kappa_of(double k, double sigma) { return kappa_of(cplx(k, 0.0), sigma); }

/// d(kappa)/dk along the analytic branch.
cplx kappa_derivative(cplx k, double sigma);

struct DampedWavenumber {
    cplx k;
    double sigma = 0.0;
    cplx kappa;

    static DampedWavenumber make(cplx k, double sigma) { return {k, sigma, kappa_of(k, sigma)}; }
    static DampedWavenumber make(double k, double sigma) { return make(cplx(k, 0.0), sigma); }
};

// ---------------------------------------------------------------------------
// Sphere grid
// ---------------------------------------------------------------------------

enum class SphereRule { Fibonacci, GaussProduct };

class SphereGrid {
public:
    /// Fibonacci lattice, equal weights 4 pi R^2 / n.
    static SphereGrid fibonacci(double radius, std::size_t n);
    /// Gauss-Legendre in cos(theta) times uniform azimuth.
    static SphereGrid gauss_product(double radius, std::size_t n_theta, std::size_t n_phi);
    /// Gauss product grid with n_phi = 2 n_theta and about n points in total.
    static SphereGrid gauss_product(double radius, std::size_t n);
    static SphereGrid make(double radius, std::size_t n, SphereRule rule);
    /// Arbitrary points on |x| = radius with caller-supplied weights.
    static SphereGrid from_points(double radius, std::vector<Vec3> points, std::vector<double> weights,
                                  SphereRule rule = SphereRule::Fibonacci);

    double radius() const { return radius_; }
    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }
    const std::vector<Vec3>& normals() const { return normals_; }
    const std::vector<double>& weights() const { return weights_; }
    SphereRule rule() const { return rule_; }

private:
    SphereGrid(double radius, std::vector<Vec3> points, std::vector<double> weights, SphereRule rule);

    double radius_ = 0.0;
    std::vector<Vec3> points_;
    std::vector<Vec3> normals_;
    std::vector<double> weights_;
    SphereRule rule_ = SphereRule::Fibonacci;
};

/// Unit directions on the Fibonacci lattice.
std::vector<Vec3> fibonacci_directions(std::size_t n);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

/// a exp(-|x - c|^2 / w^2), hard-truncated where it has fallen below 1e-12.
struct GaussianBump {
    Vec3 center{0.0, 0.0, 0.0};
    double width = 0.1;
    double amplitude = 1.0;
};

/// a (1 - |x - c|^2 / rho^2)^m inside |x - c| < rho, zero outside.
struct PolynomialBump {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 0.5;
    int exponent = 4;
    double amplitude = 1.0;
};

using Bump = std::variant<GaussianBump, PolynomialBump>;
using SourceSpec = std::vector<Bump>;

/// Relative level at which gaussian bumps are cut off.
inline constexpr double kGaussianCutoff = 1e-12;
/// Radius (in widths) beyond which a gaussian bump is below the cutoff.
double gaussian_support_factor();

/// Cell-centred samples of a real source on the cube [-R^, R^]^3.
class SourceField {
public:
    SourceField(double support_radius, std::size_t n_per_axis, std::vector<double> values, int smoothness);
    /// Zero field on the given geometry.
    static SourceField zeros(double support_radius, std::size_t n_per_axis);

    double support_radius() const { return support_radius_; }
    std::size_t n_per_axis() const { return n_; }
    double spacing() const { return h_; }
    double cell_volume() const { return h_ * h_ * h_; }
    int smoothness() const { return smoothness_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t l) const { return (i * n_ + j) * n_ + l; }
    double coordinate(std::size_t i) const { return -support_radius_ + (static_cast<double>(i) + 0.5) * h_; }
    Vec3 point(std::size_t flat) const;

    /// Nonzero samples as (position, h^3 f) pairs, in flat index order.
    const std::vector<Vec3>& active_points() const { return active_points_; }
    const std::vector<double>& active_weights() const { return active_weights_; }

    double l2_norm_sq() const;
    double l1_norm() const;
    bool same_geometry(const SourceField& other) const;

private:
    double support_radius_;
    std::size_t n_;
    double h_;
    std::vector<double> values_;
    int smoothness_;
    std::vector<Vec3> active_points_;
    std::vector<double> active_weights_;
};

/// Largest Sobolev index claimed for a spec: gaussians are smooth, a bump
/// with exponent m sits in H^m.
int smoothness_label(const SourceSpec& spec);

SourceField make_source_field(const SourceSpec& spec, std::size_t n_per_axis, double support_radius);

// ---------------------------------------------------------------------------
// Frequency grid
// ---------------------------------------------------------------------------

enum class FrequencySpacing { Linear, Sqrt };

class FrequencyGrid {
public:
    /// n nodes uniform in k on [delta, K].
    static FrequencyGrid uniform(double delta, double K, std::size_t n);
    /// n nodes uniform in sqrt(k) on [delta, K].
    static FrequencyGrid sqrt_spaced(double delta, double K, std::size_t n);
    static FrequencyGrid make(double delta, double K, std::size_t n, FrequencySpacing spacing);
    static FrequencyGrid from_nodes(std::vector<double> nodes);

    double delta() const { return nodes_.front(); }
    double K() const { return nodes_.back(); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    explicit FrequencyGrid(std::vector<double> nodes);

    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Composite trapezoid rule over the grid.
double frequency_integral(std::span<const double> values, const FrequencyGrid& grid);

/// Trapezoid integral of piecewise-linear data from the first node up to k.
double partial_frequency_integral(std::span<const double> values, const FrequencyGrid& grid, double k);

// ---------------------------------------------------------------------------
// Cauchy data
// ---------------------------------------------------------------------------

struct CauchyTrace {
    double k = 0.0;
    std::vector<cplx> u;
    std::vector<CVec3> grad_u;
    std::vector<cplx> lap_u;
    std::vector<CVec3> grad_lap_u;

    static CauchyTrace zeros(double k, std::size_t n);
    std::size_t size() const { return u.size(); }
    bool consistent() const;
};

/// Quadrature of (k^4 + k^2)|u|^2 + k^2|grad u|^2 + (k^2 + 1)|lap u|^2 + |grad lap u|^2 over the sphere.
double boundary_norm_sq(const CauchyTrace& trace, const SphereGrid& grid);

struct Provenance {
    std::string source_hash;
    std::uint64_t seed = 0;
    double noise_level = 0.0;
};

struct CauchyDataset {
    SphereGrid sphere;
    FrequencyGrid frequencies;
    std::vector<CauchyTrace> traces;
    double sigma = 0.0;
    Provenance provenance;

    void validate() const;
};

}  // namespace biplate
