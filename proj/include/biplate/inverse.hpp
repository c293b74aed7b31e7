#pragma once

// Source reconstruction from multi-frequency Cauchy data and the stability
// quantities built on the data norm: epsilon, I(k), mu(z), the
// high-frequency tail and the (sigma, K, noise) stability sweep.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biplate/core.hpp"

namespace biplate::inverse {

// ---------------------------------------------------------------------------
// Fourier samples from boundary data
// ---------------------------------------------------------------------------

struct FourierSample {
    Vec3 direction{};
    double k = 0.0;
    cplx kappa;
    cplx value;  // ~ integral of f(y) exp(-i kappa d.y) dy
};

/// Samples on a polar grid, direction-major: samples[dir * nk + j].
struct FourierSampleSet {
    std::vector<Vec3> directions;
    std::vector<double> k;
    double sigma = 0.0;
    std::vector<FourierSample> samples;

    std::size_t size() const { return samples.size(); }
    const FourierSample& at(std::size_t dir, std::size_t j) const { return samples[dir * k.size() + j]; }
};

/// Green's second identity for the bilaplacian against exp(-i kappa d.x):
/// integral over the sphere of
///   d_nu(lap u) v - lap u d_nu v + d_nu u lap v - u d_nu(lap v).
cplx boundary_functional(const CauchyTrace& trace, const SphereGrid& grid, const Vec3& direction, double k,
                         double sigma);

/// Applies boundary_functional over directions x selected frequency nodes.
FourierSampleSet sample_fourier(const CauchyDataset& dataset, std::span<const Vec3> directions,
                                std::span<const std::size_t> k_indices);
FourierSampleSet sample_fourier(const CauchyDataset& dataset, std::span<const Vec3> directions);

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

struct Reconstruction {
    SourceField field;
    double max_imag_residue = 0.0;
    double max_abs_real = 0.0;
    bool imag_warning = false;  // residue above 10% of max |f_rec|
};

/// Band-limited polar inversion with radial coordinate rho(k) = Re kappa(k):
///   f(x) = (2 pi)^-3 sum_d sum_k W_d W_k F(d, k) e^{i rho d.x} rho^2 rho'(k).
/// Nodes above K_max are ignored. Values are returned on the target geometry.
Reconstruction reconstruct(const FourierSampleSet& samples, const SourceField& target,
                           std::optional<double> K_max = std::nullopt);

double relative_l2_error(const SourceField& f_rec, const SourceField& f_true);

// ---------------------------------------------------------------------------
// Noise and data norms
// ---------------------------------------------------------------------------

/// Adds level * rms(component) * z to every complex component, where z is a
/// standard complex gaussian drawn from a counter-based generator keyed by
/// (seed, frequency index, point index, component index).
CauchyDataset add_noise(const CauchyDataset& dataset, double level, std::uint64_t seed);

/// Standard complex gaussian for one key; E|z|^2 = 1.
cplx counter_gaussian(std::uint64_t seed, std::uint64_t freq, std::uint64_t point, std::uint64_t component);

std::vector<double> boundary_norms(const CauchyDataset& dataset);

/// Trapezoid integral of the boundary norm over [delta, K].
double epsilon_data(const CauchyDataset& dataset);

/// Trapezoid integral of the boundary norm over [delta, k].
double I_of_k(const CauchyDataset& dataset, double k);

// ---------------------------------------------------------------------------
// Analytic continuation
// ---------------------------------------------------------------------------

struct AnalyticContinuationParams {
    double delta = 0.5;
    double K = 5.0;
    double d = 0.05;

    double a() const { return K - delta; }
    void validate() const;
};

/// 64 a d / (3 pi^2 (a^2 + 4 d^2)) * exp(pi / (2 d) * (a / 2 - z)), z > K.
double mu_lower_bound(double z, const AnalyticContinuationParams& params);

struct ContinuationReport {
    std::vector<double> k;          // nodes beyond K
    std::vector<double> lhs;        // I(k)
    std::vector<double> rhs_shape;  // Q^2 exp(4 R (sigma + 2) |kappa|) eps1^(2 mu(k))
    std::vector<double> slack;      // C * rhs_shape - lhs
    double epsilon1_sq = 0.0;
    double fitted_constant = 0.0;
    bool degenerate = false;
};

/// Fits the smallest C with I(k) <= C * rhs_shape(k) at every dataset node
/// k > K. The dataset must start at delta and extend past K.
ContinuationReport continuation_envelope_check(const CauchyDataset& dataset, const AnalyticContinuationParams& params,
                                               double Q);

// ---------------------------------------------------------------------------
// High-frequency tail
// ---------------------------------------------------------------------------

/// Integral of the boundary norm over [s, s_max] on n_nodes uniform nodes.
double tail_integral(const SourceField& f, double sigma, double s, double s_max, const SphereGrid& grid,
                     std::size_t n_nodes = 64);

/// Tails from every node of `nodes` to its last node, from one synthesis.
std::vector<double> tail_profile(const SourceField& f, double sigma, const FrequencyGrid& nodes,
                                 const SphereGrid& grid);

// ---------------------------------------------------------------------------
// Stability sweep
// ---------------------------------------------------------------------------

struct StabilityRecord {
    double sigma = 0.0;
    double K = 0.0;
    double noise = 0.0;
    double epsilon = 0.0;
    double rel_error = 0.0;
    double Q = 0.0;
    int n = 0;
    std::uint64_t seed = 0;
    double imag_residue = 0.0;
};

struct SweepConfig {
    double R = 1.0;
    double R_hat = 0.7;
    double delta = 0.5;
    std::vector<double> sigmas{0.1};
    std::vector<double> Ks{8.0};
    std::size_t nk = 64;
    FrequencySpacing spacing = FrequencySpacing::Sqrt;
    std::size_t n_sphere = 2048;
    SphereRule sphere_rule = SphereRule::GaussProduct;
    std::size_t n_vol = 32;
    std::size_t n_dir = 192;
    std::vector<double> noise_levels{0.0};
    std::vector<std::uint64_t> seeds{1};
    SourceSpec source;
    std::optional<double> Q;
    std::optional<int> smoothness;
};

/// Error raised inside one sweep cell, with the cell coordinates attached.
class SweepCellError : public std::runtime_error {
public:
    SweepCellError(double sigma, double K, double noise, std::uint64_t seed, const std::string& what);
    double sigma, K, noise;
    std::uint64_t seed;
};

/// Shares the source, grids and noiseless datasets between sweep cells.
class SweepContext {
public:
    explicit SweepContext(SweepConfig config);

    const SweepConfig& config() const { return config_; }
    const SourceField& source() const { return source_; }
    const SphereGrid& sphere() const { return sphere_; }
    const std::vector<Vec3>& directions() const { return directions_; }

    /// synthesize -> add_noise -> sample_fourier -> reconstruct -> error.
    /// Throws SweepCellError.
    StabilityRecord run_cell(double sigma, double K, double noise, std::uint64_t seed);

private:
    const CauchyDataset& clean_dataset(double sigma, double K);

    SweepConfig config_;
    SourceField source_;
    SphereGrid sphere_;
    std::vector<Vec3> directions_;
    std::optional<std::pair<double, double>> cached_key_;
    std::optional<CauchyDataset> cached_;
};

/// Full (sigma, K, noise, seed) cross product in that nesting order.
std::vector<StabilityRecord> stability_sweep(const SweepConfig& config);

}  // namespace biplate::inverse
