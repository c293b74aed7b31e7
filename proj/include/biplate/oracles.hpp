#pragma once

// Independent reference computations with frozen tolerances. The verify
// command and the acceptance binary both run these.

#include <cstdint>
#include <string>
#include <vector>

#include "biplate/core.hpp"
#include "biplate/timedomain.hpp"

namespace biplate::oracles {

inline constexpr double kGreenIdentityTol = 1e-6;
inline constexpr double kCrossSolverTol = 2e-2;
inline constexpr double kMultiplierTol = 1e-8;
inline constexpr double kOdeIdentityTol = 1e-12;
inline constexpr double kResidualOrderMin = 1.8;
inline constexpr double kMuRelTol = 1e-12;

struct OracleResult {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    std::string relation;  // "<", "<=" or ">="
    bool pass = false;
    std::string detail;
};

OracleResult make_result(std::string name, double measured, std::string relation, double bound, std::string detail = {});

// ---------------------------------------------------------------------------
// Green's identity: boundary functional vs. direct volume sum
// ---------------------------------------------------------------------------

struct GreenIdentityParams {
    std::vector<double> ks{1.0, 5.0, 10.0};
    double sigma = 0.5;
    double R = 1.0;
    double R_hat = 0.7;
    std::size_t n_sphere = 2048;
    SphereRule rule = SphereRule::GaussProduct;
    std::size_t n_vol = 64;
    std::size_t n_dir = 8;
    SourceSpec source{GaussianBump{{0.1, 0.0, -0.05}, 0.1, 1.0}};
    double data_scale = 1.0;  // multiplies every trace; 1 except in sensitivity checks
};

struct GreenIdentitySample {
    double k = 0.0;
    Vec3 direction{};
    cplx boundary;
    cplx volume;
    double rel_error = 0.0;
};

std::vector<GreenIdentitySample> green_identity_samples(const GreenIdentityParams& p);
OracleResult green_identity_oracle(const GreenIdentityParams& p = {});

// ---------------------------------------------------------------------------
// Multiplier vs. adaptive ODE integration
// ---------------------------------------------------------------------------

struct MultiplierOracleParams {
    std::size_t n_triples = 100;
    std::uint64_t seed = 20240611;
    double t_max = 20.0;
    double xi_max = 2.0;
    double sigma_max = 3.0;
};

struct MultiplierTriple {
    double t = 0.0, xi = 0.0, sigma = 0.0;
};

/// Random triples, a third in each of the series, hyperbolic and oscillatory
/// regimes, plus points on the regime boundaries.
std::vector<MultiplierTriple> multiplier_triples(const MultiplierOracleParams& p);

/// (m, m', m'') from Runge-Kutta-Fehlberg 7(8) with tolerance 1e-14.
timedomain::MultiplierValues integrate_multiplier(double t, double xi, double sigma);

struct MultiplierOracleReport {
    double max_abs_error = 0.0;
    double max_identity_residual = 0.0;
    MultiplierTriple worst{};
};

MultiplierOracleReport multiplier_oracle_report(const MultiplierOracleParams& p = {});
std::vector<OracleResult> multiplier_oracle(const MultiplierOracleParams& p = {});

// ---------------------------------------------------------------------------
// Cross-solver: time-domain transform vs. frequency-domain field
// ---------------------------------------------------------------------------

struct CrossSolverParams {
    double sigma = 0.5;
    double R = 1.0;
    double R_hat = 0.9;
    std::size_t n_vol = 36;
    SourceSpec source{GaussianBump{{0.05, 0.0, 0.0}, 0.16, 1.0}};
    std::size_t n_points = 8;
    double k_lo = 1.0, k_hi = 5.0;
    std::size_t nk = 9;
    double T_max = 200.0;
    double dt = 0.02;
    timedomain::BoxParams box{36.0, 288, 12.0};
    double guard_ratio = timedomain::kDefaultGuardRatio;
};

struct CrossSolverReport {
    std::vector<double> k;
    std::vector<double> rel_error;  // [k * n_points + point]
    double max_rel_error = 0.0;
    double max_guard_ratio = 0.0;
};

CrossSolverReport cross_solver_report(const CrossSolverParams& p = {});
OracleResult cross_solver_oracle(const CrossSolverParams& p = {});

// ---------------------------------------------------------------------------
// PDE residual order
// ---------------------------------------------------------------------------

struct ResidualOrderParams {
    double k = 2.0;
    double sigma = 0.5;
    double R_hat = 0.5;
    std::size_t n_vol = 24;
    SourceSpec source{GaussianBump{{0.0, 0.0, 0.0}, 0.08, 1.0}};
    std::vector<Vec3> centres{{0.9, 0.1, -0.2}, {-0.3, 0.85, 0.4}, {0.2, -0.4, -0.95}};
    double outer_radius = 1.5;
    double h0 = 0.04;
    std::size_t levels = 3;
};

struct ResidualOrderReport {
    std::vector<double> h;
    std::vector<double> residual;  // normalized by max |u|
    std::vector<double> order;     // between consecutive levels
    double min_order = 0.0;
};

ResidualOrderReport residual_order_report(const ResidualOrderParams& p = {});
OracleResult residual_order_oracle(const ResidualOrderParams& p = {});

// ---------------------------------------------------------------------------
// mu(z) in 50-digit decimal arithmetic
// ---------------------------------------------------------------------------

/// mu(z) evaluated with boost::multiprecision::cpp_dec_float_50, as a string.
std::string mu_high_precision(double z, double delta, double K, double d);
OracleResult mu_oracle(double z = 6.0, double delta = 1.0, double K = 5.0, double d = 0.5);

// ---------------------------------------------------------------------------

struct VerifyReport {
    std::vector<OracleResult> results;
    bool pass() const;
};

/// Every oracle above at its default parameters.
VerifyReport run_all_oracles();

std::string verify_report_json(const VerifyReport& r);

}  // namespace biplate::oracles
