#pragma once

// Damped plate wave IVP on a periodic box, solved exactly in time through the
// Fourier multiplier m(t, |xi|); decay fits, energies, boundary flux and the
// time-to-frequency transform.

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "biplate/core.hpp"

namespace biplate::timedomain {

// ---------------------------------------------------------------------------
// Multiplier
// ---------------------------------------------------------------------------

struct MultiplierValues {
    double m = 0.0;
    double dm = 0.0;
    double d2m = 0.0;
};

/// Solution of m'' + sigma m' + |xi|^4 m = 0, m(0) = 0, m'(0) = 1, with its
/// first two derivatives.
MultiplierValues multiplier_values(double t, double xi_abs, double sigma);

double multiplier(double t, double xi_abs, double sigma);

/// order 1 or 2.
double multiplier_dt(double t, double xi_abs, double sigma, int order);

// ---------------------------------------------------------------------------
// Box field
// ---------------------------------------------------------------------------

struct BoxParams {
    double L = 20.0;        // half-length of the periodic box [-L, L)^3
    std::size_t n = 128;    // modes (and grid points) per axis, even
    std::optional<double> xi_cut;  // modes with |xi| > xi_cut are dropped
};

/// f(x) = sum_xi c_xi e^{i xi.x}, xi = (pi / L) (i - n/2, j - n/2, l - n/2).
/// Nyquist modes are zero so the coefficient set is conjugate-symmetric.
class SpectralBoxField {
public:
    SpectralBoxField(BoxParams box, double sigma, std::vector<cplx> coeffs);

    double L() const { return box_.L; }
    std::size_t n() const { return box_.n; }
    double sigma() const { return sigma_; }
    const BoxParams& box() const { return box_; }
    double xi_step() const;
    double spacing() const { return 2.0 * box_.L / static_cast<double>(box_.n); }
    double coordinate(std::size_t j) const { return -box_.L + static_cast<double>(j) * spacing(); }
    int mode_index(std::size_t i) const { return static_cast<int>(i) - static_cast<int>(box_.n / 2); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t l) const { return (i * box_.n + j) * box_.n + l; }
    const std::vector<cplx>& coeffs() const { return coeffs_; }

private:
    BoxParams box_;
    double sigma_;
    std::vector<cplx> coeffs_;
};

/// Exact Fourier projection of the point-source quadrature of f onto the box
/// modes. Requires R^ <= L / 2.
SpectralBoxField make_box_field(const SourceField& f, const BoxParams& box, double sigma);

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

enum class FieldKind { U, Ut, Utt, Ux, Uy, Uz, LapU, LapUx, LapUy, LapUz, Utx, Uty, Utz, LapUt };

const char* field_kind_name(FieldKind kind);

/// Raised when |U| on the box faces exceeds guard_ratio times the sup of |U|
/// over the run so far (times taken in increasing order).
class WrapAroundError : public std::runtime_error {
public:
    WrapAroundError(double time, double ratio);
    double time;
    double ratio;
};

inline constexpr double kDefaultGuardRatio = 1e-3;

struct Snapshot {
    double t = 0.0;
    std::vector<FieldKind> kinds;
    std::vector<std::vector<double>> fields;  // one n^3 array per kind
    double max_imag = 0.0;                    // largest discarded imaginary part
    double guard_ratio = 0.0;                 // boundary-face max |U| / running sup |U|

    const std::vector<double>& field(FieldKind kind) const;
};

struct EvolveOptions {
    std::vector<FieldKind> kinds{FieldKind::U};
    double guard_ratio = kDefaultGuardRatio;  // <= 0 disables the guard
};

/// Streams one snapshot per time to the callback.
void evolve_each(const SpectralBoxField& field, std::span<const double> times, const EvolveOptions& options,
                 const std::function<void(const Snapshot&)>& sink);

std::vector<Snapshot> evolve(const SpectralBoxField& field, std::span<const double> times,
                             const EvolveOptions& options);

/// Time series at arbitrary points, values[kind][time * n_points + point].
struct PointSeries {
    std::vector<double> times;
    std::vector<Vec3> points;
    std::vector<FieldKind> kinds;
    std::vector<std::vector<double>> values;
    std::vector<double> guard_ratios;  // per time; empty when the guard is off

    std::size_t n_points() const { return points.size(); }
    const std::vector<double>& series(FieldKind kind) const;
    double at(FieldKind kind, std::size_t time, std::size_t point) const {
        return series(kind)[time * points.size() + point];
    }
};

/// Direct Fourier summation at the points, grouping modes by |xi|. For the
/// guard, sup |U| is taken over the points and the box centre.
PointSeries evolve_at_points(const SpectralBoxField& field, std::span<const Vec3> points,
                             std::span<const double> times, std::span<const FieldKind> kinds,
                             double guard_ratio = kDefaultGuardRatio);

/// Uniform grid t0, t0 + dt, ..., t1 with dt <= dt_max.
std::vector<double> uniform_times(double t0, double t1, double dt_max);

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// Least-squares slope of log(sup_norm) against log(1 + t).
double decay_fit(std::span<const double> times, std::span<const double> sup_norms);

struct EnergyValues {
    double E = 0.0;
    double E0 = 0.0;
};

/// E = 1/2 int_{|x|<R} (Ut^2 + (lap U)^2 + U^2), E0 without U^2, by grid
/// quadrature. The snapshot must hold U, Ut and LapU (U only for E).
EnergyValues energies(const Snapshot& snapshot, const SpectralBoxField& field, double R);

/// Trapezoid in time, sphere quadrature in space, of
/// Utt^2 + Ut^2 + |grad Ut|^2 + (lap Ut)^2 + (lap U)^2 + |grad lap U|^2
/// between time indices i1 <= i2 of a uniform series on the sphere points.
double boundary_flux_F2(const PointSeries& series, const SphereGrid& sphere, std::size_t i1, std::size_t i2);
double boundary_flux_F2(const PointSeries& series, const SphereGrid& sphere);

/// Field kinds needed by boundary_flux_F2.
std::vector<FieldKind> flux_kinds();

struct EnergyReport {
    std::vector<double> times;
    std::vector<double> E;
    std::vector<double> E0;
    double F2 = 0.0;  // over [times.front(), times.back()]
};

struct FluxParams {
    double R = 1.0;
    BoxParams box{8.0, 96, std::nullopt};
    std::size_t n_sphere = 200;
    SphereRule sphere_rule = SphereRule::GaussProduct;
    double dt_max = 0.005;
    double guard_ratio = kDefaultGuardRatio;
};

/// Energies at the given times and F2 over their range.
EnergyReport energy_report(const SourceField& f, double sigma, std::span<const double> times, const FluxParams& params);

struct ObservabilityReport {
    double T = 0.0;
    double f_norm_sq = 0.0;
    double F2 = 0.0;
    double ratio = 0.0;  // NaN when degenerate
    bool degenerate = false;
};

/// Open interval 4(2R + 1) < T < 5(2R + 1).
bool observability_window_contains(double R, double T);

/// ||f||^2 over B_R divided by F2(0, T).
ObservabilityReport observability_ratio(const SourceField& f, double sigma, double T, const FluxParams& params);

struct EnergyInequalityResult {
    double t1 = 0.0, t2 = 0.0;
    double E0_t1 = 0.0, E0_t2 = 0.0;
    double F2 = 0.0;
    double margin = 0.0;  // E0(t1) + F2 - E0(t2)
};

EnergyInequalityResult energy_inequality_check(const SourceField& f, double sigma, double t1, double t2,
                                               const FluxParams& params);

/// Trapezoid rule for int_0^T U(t) e^{ikt} dt per point on a uniform grid
/// starting at 0. values are laid out [time * n_points + point]; the result
/// is [k_index * n_points + point].
std::vector<cplx> time_to_frequency(std::span<const double> times, std::span<const double> values,
                                    std::size_t n_points, std::span<const double> k);

std::vector<cplx> time_to_frequency(const PointSeries& series, std::span<const double> k);

}  // namespace biplate::timedomain
