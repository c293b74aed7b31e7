#pragma once

// Experiment configuration and the five command drivers behind the CLI.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biplate/core.hpp"
#include "biplate/inverse.hpp"
#include "biplate/oracles.hpp"
#include "biplate/timedomain.hpp"

namespace biplate::harness {

struct FluxConfig {
    std::size_t n_sphere = 128;
    double dt = 0.01;
    double guard_ratio = 0.0;  // off: see README on the guard in flux runs
    timedomain::BoxParams box{12.0, 96, 16.0};
    std::optional<timedomain::BoxParams> refined_box;
};

struct ExperimentConfig {
    double R = 3.2;
    double R_hat = 2.8;
    double delta = 0.02;
    double d = 0.05;
    std::vector<double> sigmas{0.1};
    std::vector<double> Ks{64.0};
    std::size_t nk = 64;
    FrequencySpacing spacing = FrequencySpacing::Sqrt;
    std::size_t n_sphere = 2048;
    SphereRule sphere_rule = SphereRule::GaussProduct;
    std::size_t n_vol = 16;
    std::size_t n_dir = 192;
    std::vector<double> noise_levels{0.0};
    std::vector<std::uint64_t> seeds{1};
    SourceSpec source{GaussianBump{{0.0, 0.0, 0.0}, 0.53, 1.0}};
    std::optional<double> Q;
    std::optional<int> smoothness;

    timedomain::BoxParams box{30.0, 128, std::nullopt};
    std::vector<double> times;
    std::array<double, 2> fit_window{10.0, 100.0};
    double guard_ratio = timedomain::kDefaultGuardRatio;
    std::vector<double> T;
    std::vector<std::pair<double, double>> energy_pairs;
    FluxConfig flux;

    double trend_slack = 0.05;
    std::string out = "out";

    /// Throws ValidationError on the first violated invariant.
    void validate() const;
    /// Canonical JSON of every field (sorted keys, defaults filled in).
    std::string to_json() const;
    /// FNV-1a of to_json() without the output directory.
    std::string hash() const;

    SourceField make_source() const;
    inverse::SweepConfig sweep_config() const;
    timedomain::FluxParams flux_params(bool refined = false) const;
};

/// The embedded defaults as JSON text.
std::string default_config_json();

/// Overlays `json_text` on the defaults. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
    std::filesystem::path out;  // empty: use the config's output directory
    bool force = false;
    std::optional<std::uint64_t> seed;  // replaces the config's seed list
};

/// Resolves the output directory and applies the seed override.
ExperimentConfig apply_options(ExperimentConfig config, const RunOptions& options);
std::filesystem::path output_dir(const ExperimentConfig& config, const RunOptions& options);

// ---------------------------------------------------------------------------

struct SynthResult {
    std::filesystem::path dir;
    double epsilon = 0.0;
};

/// Dataset for the first (sigma, K, noise, seed) of the config.
SynthResult run_synth(const ExperimentConfig& config, const RunOptions& options);

struct ReconResult {
    std::optional<double> rel_error;  // absent without a nonzero stored truth
    double imag_residue = 0.0;
    double max_abs_real = 0.0;
    std::string status;
};

/// Reconstructs from the dataset at `dataset_dir` (the output directory when
/// empty) and writes <out>/recon plus results/recon.csv.
ReconResult run_recon(const ExperimentConfig& config, const std::filesystem::path& dataset_dir,
                      const RunOptions& options);

struct DecayFitRow {
    double sigma = 0.0;
    std::string quantity;  // "sup_U" or "sup_grad_U"
    std::optional<double> slope;
    std::string status;    // "ok" or the reason the fit was skipped
};

struct TimesimResult {
    std::vector<DecayFitRow> fits;
    std::vector<timedomain::EnergyInequalityResult> energy;
    std::vector<double> energy_sigmas;
    std::vector<timedomain::ObservabilityReport> observability;
    std::vector<std::optional<double>> observability_refined;
    std::vector<double> observability_sigmas;
};

/// Decay series and fits (when `times` is set), energy inequality pairs and
/// observability ratios. WrapAroundError propagates.
TimesimResult run_timesim(const ExperimentConfig& config, const RunOptions& options);

struct SweepFailure {
    double sigma = 0.0, K = 0.0, noise = 0.0;
    std::uint64_t seed = 0;
    std::string message;
};

struct TrendVerdict {
    std::string check;  // "monotone_in_K" or "monotone_in_sigma"
    double fixed = 0.0;  // sigma for the K trend, K for the sigma trend
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> errors;
    std::string verdict;  // pass, fail, incomplete, n/a
};

struct SweepOutcome {
    std::vector<inverse::StabilityRecord> records;
    std::vector<SweepFailure> failures;
    std::vector<TrendVerdict> verdicts;
    std::string config_hash;
};

/// Error nonincreasing in K and nondecreasing in sigma, each within `slack`
/// relative to the previous value.
std::vector<TrendVerdict> trend_verdicts(const std::vector<inverse::StabilityRecord>& records,
                                         const std::vector<SweepFailure>& failures, double slack);

SweepOutcome run_sweep(const ExperimentConfig& config, const RunOptions& options);

/// Runs every oracle and writes results/verify.json and results/verify.csv.
oracles::VerifyReport run_verify(const RunOptions& options);

}  // namespace biplate::harness
