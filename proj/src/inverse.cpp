#include "biplate/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "biplate/forward.hpp"
#include "biplate/parallel.hpp"

namespace biplate::inverse {

namespace {

constexpr cplx kI{0.0, 1.0};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_open(std::uint64_t h) { return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53; }

// Component kinds in storage order: u, grad_u (3), lap_u, grad_lap_u (3).
constexpr int kComponents = 8;

cplx& component(CauchyTrace& t, std::size_t p, int c) {
    if (c == 0) return t.u[p];
    if (c <= 3) return t.grad_u[p][c - 1];
    if (c == 4) return t.lap_u[p];
    return t.grad_lap_u[p][c - 5];
}

void check_unit(const Vec3& d) {
    if (std::abs(norm(d) - 1.0) > 1e-12) throw ValidationError("direction must be a unit vector");
}

}  // namespace

// ---------------------------------------------------------------------------

cplx boundary_functional(const CauchyTrace& trace, const SphereGrid& grid, const Vec3& direction, double k,
                         double sigma) {
    if (!trace.consistent() || trace.size() != grid.size())
        throw ValidationError("boundary_functional: trace and sphere grid sizes differ");
    check_unit(direction);
    const cplx kappa = kappa_of(k, sigma);
    const cplx k2 = kappa * kappa;
    const cplx dv_scale = -kI * kappa;        // d_nu v = -i kappa (d.nu) v
    const cplx dlapv_scale = kI * kappa * k2;  // d_nu lap v = i kappa^3 (d.nu) v
    cplx sum{};
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const Vec3& x = grid.points()[p];
        const Vec3& nu = grid.normals()[p];
        const cplx v = std::exp(-kI * kappa * dot(direction, x));
        const double dn = dot(direction, nu);
        const auto& g = trace.grad_u[p];
        const auto& gl = trace.grad_lap_u[p];
        const cplx dnu_u = g[0] * nu[0] + g[1] * nu[1] + g[2] * nu[2];
        const cplx dnu_lap = gl[0] * nu[0] + gl[1] * nu[1] + gl[2] * nu[2];
        const cplx term = dnu_lap - trace.lap_u[p] * (dv_scale * dn) - dnu_u * k2 - trace.u[p] * (dlapv_scale * dn);
        sum += grid.weights()[p] * term * v;
    }
    return sum;
}

FourierSampleSet sample_fourier(const CauchyDataset& dataset, std::span<const Vec3> directions,
                                std::span<const std::size_t> k_indices) {
    dataset.validate();
    for (const auto& d : directions) check_unit(d);
    for (auto j : k_indices)
        if (j >= dataset.traces.size()) throw ValidationError("sample_fourier: frequency index out of range");

    FourierSampleSet set;
    set.directions.assign(directions.begin(), directions.end());
    set.sigma = dataset.sigma;
    for (auto j : k_indices) set.k.push_back(dataset.frequencies.nodes()[j]);
    const std::size_t nk = k_indices.size();
    set.samples.resize(directions.size() * nk);
    parallel_for(set.samples.size(), [&](std::size_t idx) {
        const std::size_t dir = idx / nk, j = idx % nk;
        const auto& trace = dataset.traces[k_indices[j]];
        FourierSample s;
        s.direction = directions[dir];
        s.k = trace.k;
        s.kappa = kappa_of(trace.k, dataset.sigma);
        s.value = boundary_functional(trace, dataset.sphere, s.direction, trace.k, dataset.sigma);
        set.samples[idx] = s;
    });
    return set;
}

FourierSampleSet sample_fourier(const CauchyDataset& dataset, std::span<const Vec3> directions) {
    std::vector<std::size_t> all(dataset.traces.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    return sample_fourier(dataset, directions, all);
}

// ---------------------------------------------------------------------------

Reconstruction reconstruct(const FourierSampleSet& samples, const SourceField& target, std::optional<double> K_max) {
    if (samples.samples.empty() || samples.directions.empty() || samples.k.empty())
        throw ValidationError("reconstruct: empty sample set");
    if (samples.samples.size() != samples.directions.size() * samples.k.size())
        throw ValidationError("reconstruct: samples do not cover the direction x frequency grid");

    std::size_t nk = samples.k.size();
    if (K_max) nk = static_cast<std::size_t>(std::upper_bound(samples.k.begin(), samples.k.end(), *K_max) - samples.k.begin());
    if (nk < 2) throw ValidationError("reconstruct: need at least two frequency nodes below K");
    const auto kgrid = FrequencyGrid::from_nodes(std::vector<double>(samples.k.begin(), samples.k.begin() + nk));

    const std::size_t n_dir = samples.directions.size();
    const std::size_t n = target.n_per_axis();
    const double w_dir = 4.0 * kPi / static_cast<double>(n_dir);
    const double norm_c = 1.0 / std::pow(2.0 * kPi, 3);

    // Radial coordinate and Jacobian per node.
    std::vector<double> rho(nk), weight(nk);
    for (std::size_t j = 0; j < nk; ++j) {
        const double k = samples.k[j];
        const cplx kap = kappa_of(k, samples.sigma);
        rho[j] = kap.real();
        const double drho = kappa_derivative(cplx(k, 0.0), samples.sigma).real();
        weight[j] = norm_c * w_dir * kgrid.weights()[j] * rho[j] * rho[j] * drho;
    }

    std::vector<double> axis(n);
    for (std::size_t i = 0; i < n; ++i) axis[i] = target.coordinate(i);
    const double R2 = target.support_radius() * target.support_radius();

    std::vector<cplx> acc(n * n * n);
    parallel_for(n, [&](std::size_t i) {
        std::vector<cplx> ey(n), ez(n);
        for (std::size_t dir = 0; dir < n_dir; ++dir) {
            const Vec3& d = samples.directions[dir];
            for (std::size_t j = 0; j < nk; ++j) {
                const double r = rho[j];
                const cplx c = weight[j] * samples.at(dir, j).value * std::exp(kI * (r * d[0] * axis[i]));
                for (std::size_t a = 0; a < n; ++a) {
                    ey[a] = std::exp(kI * (r * d[1] * axis[a]));
                    ez[a] = std::exp(kI * (r * d[2] * axis[a]));
                }
                for (std::size_t jj = 0; jj < n; ++jj) {
                    const double yy = axis[i] * axis[i] + axis[jj] * axis[jj];
                    if (yy > R2) continue;
                    const cplx cy = c * ey[jj];
                    cplx* row = &acc[target.index(i, jj, 0)];
                    for (std::size_t l = 0; l < n; ++l) {
                        if (yy + axis[l] * axis[l] > R2) continue;
                        row[l] += cy * ez[l];
                    }
                }
            }
        }
    });

    Reconstruction out{SourceField::zeros(target.support_radius(), n)};
    std::vector<double> values(acc.size());
    for (std::size_t p = 0; p < acc.size(); ++p) {
        values[p] = acc[p].real();
        out.max_abs_real = std::max(out.max_abs_real, std::abs(acc[p].real()));
        out.max_imag_residue = std::max(out.max_imag_residue, std::abs(acc[p].imag()));
    }
    out.field = SourceField(target.support_radius(), n, std::move(values), target.smoothness());
    out.imag_warning = out.max_imag_residue > 0.1 * out.max_abs_real;
    if (out.imag_warning)
        std::cerr << "warning: reconstruct: imaginary residue " << out.max_imag_residue << " exceeds 10% of max |f_rec| "
                  << out.max_abs_real << '\n';
    return out;
}

double relative_l2_error(const SourceField& f_rec, const SourceField& f_true) {
    if (!f_rec.same_geometry(f_true)) throw ValidationError("relative_l2_error: grids differ");
    const double den = f_true.l2_norm_sq();
    if (!(den > 0.0)) throw ValidationError("relative_l2_error: reference field is zero");
    double num = 0.0;
    const auto& a = f_rec.values();
    const auto& b = f_true.values();
    for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(num * f_true.cell_volume() / den);
}

// ---------------------------------------------------------------------------

cplx counter_gaussian(std::uint64_t seed, std::uint64_t freq, std::uint64_t point, std::uint64_t component_index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ freq);
    h = splitmix64(h ^ point);
    h = splitmix64(h ^ component_index);
    const double u1 = unit_open(h);
    const double u2 = unit_open(splitmix64(h ^ 0x5851f42d4c957f2dULL));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * kPi * u2;
    return cplx(r * std::cos(t), r * std::sin(t)) / std::sqrt(2.0);
}

CauchyDataset add_noise(const CauchyDataset& dataset, double level, std::uint64_t seed) {
    if (!(level >= 0.0)) throw ValidationError("add_noise: level must be nonnegative");
    dataset.validate();
    CauchyDataset out = dataset;
    out.provenance.seed = seed;
    out.provenance.noise_level = level;
    if (level == 0.0) return out;

    double sum[kComponents] = {};
    std::size_t count = 0;
    for (auto& t : out.traces) {
        for (std::size_t p = 0; p < t.size(); ++p)
            for (int c = 0; c < kComponents; ++c) sum[c] += std::norm(component(t, p, c));
        count += t.size();
    }
    double scale[kComponents];
    for (int c = 0; c < kComponents; ++c) scale[c] = level * std::sqrt(sum[c] / static_cast<double>(count));

    parallel_for(out.traces.size(), [&](std::size_t j) {
        auto& t = out.traces[j];
        for (std::size_t p = 0; p < t.size(); ++p)
            for (int c = 0; c < kComponents; ++c)
                component(t, p, c) += scale[c] * counter_gaussian(seed, j, p, static_cast<std::uint64_t>(c));
    });
    return out;
}

std::vector<double> boundary_norms(const CauchyDataset& dataset) {
    dataset.validate();
    std::vector<double> out(dataset.traces.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = boundary_norm_sq(dataset.traces[j], dataset.sphere);
    return out;
}

double epsilon_data(const CauchyDataset& dataset) {
    return frequency_integral(boundary_norms(dataset), dataset.frequencies);
}

double I_of_k(const CauchyDataset& dataset, double k) {
    return partial_frequency_integral(boundary_norms(dataset), dataset.frequencies, k);
}

// ---------------------------------------------------------------------------

void AnalyticContinuationParams::validate() const {
    if (!(delta > 0.0 && K > delta && d > 0.0))
        throw ValidationError("AnalyticContinuationParams: need 0 < delta < K and d > 0");
}

double mu_lower_bound(double z, const AnalyticContinuationParams& params) {
    params.validate();
    if (!(z > params.K)) throw ValidationError("mu_lower_bound: z must exceed K");
    const double a = params.a(), d = params.d;
    const double pre = 64.0 * a * d / (3.0 * kPi * kPi * (a * a + 4.0 * d * d));
    return pre * std::exp(kPi / (2.0 * d) * (a / 2.0 - z));
}

ContinuationReport continuation_envelope_check(const CauchyDataset& dataset, const AnalyticContinuationParams& params,
                                               double Q) {
    params.validate();
    const auto& nodes = dataset.frequencies.nodes();
    if (std::abs(nodes.front() - params.delta) > 1e-12 * params.delta)
        throw ValidationError("continuation_envelope_check: dataset must start at delta");
    if (!(nodes.back() > params.K)) throw ValidationError("continuation_envelope_check: dataset must extend past K");

    const auto norms = boundary_norms(dataset);
    const double R = dataset.sphere.radius();
    ContinuationReport rep;
    rep.epsilon1_sq = partial_frequency_integral(norms, dataset.frequencies, params.K);
    double C = 0.0;
    bool any = false;
    for (double k : nodes) {
        if (!(k > params.K)) continue;
        const double lhs = partial_frequency_integral(norms, dataset.frequencies, k);
        const double kap = std::abs(kappa_of(k, dataset.sigma));
        const double rhs = Q * Q * std::exp(4.0 * R * (dataset.sigma + 2.0) * kap) *
                           std::pow(rep.epsilon1_sq, mu_lower_bound(k, params));
        rep.k.push_back(k);
        rep.lhs.push_back(lhs);
        rep.rhs_shape.push_back(rhs);
        if (lhs > 0.0) {
            any = true;
            C = std::max(C, rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity());
        }
    }
    rep.degenerate = !any;
    rep.fitted_constant = C;
    for (std::size_t i = 0; i < rep.k.size(); ++i) rep.slack.push_back(C * rep.rhs_shape[i] - rep.lhs[i]);
    return rep;
}

// ---------------------------------------------------------------------------

std::vector<double> tail_profile(const SourceField& f, double sigma, const FrequencyGrid& nodes, const SphereGrid& grid) {
    const auto& k = nodes.nodes();
    std::vector<double> norms(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) norms[j] = boundary_norm_sq(forward::synthesize_cauchy(f, grid, k[j], sigma), grid);
    std::vector<double> tails(k.size(), 0.0);
    for (std::size_t j = k.size() - 1; j-- > 0;) tails[j] = tails[j + 1] + 0.5 * (k[j + 1] - k[j]) * (norms[j] + norms[j + 1]);
    return tails;
}

double tail_integral(const SourceField& f, double sigma, double s, double s_max, const SphereGrid& grid,
                     std::size_t n_nodes) {
    if (!(s > 0.0 && s <= s_max)) throw ValidationError("tail_integral: need 0 < s <= s_max");
    if (s == s_max) return 0.0;
    return tail_profile(f, sigma, FrequencyGrid::uniform(s, s_max, std::max<std::size_t>(n_nodes, 2)), grid).front();
}

// ---------------------------------------------------------------------------

SweepCellError::SweepCellError(double sigma_, double K_, double noise_, std::uint64_t seed_, const std::string& what)
    : std::runtime_error("sweep cell (sigma=" + std::to_string(sigma_) + ", K=" + std::to_string(K_) +
                         ", noise=" + std::to_string(noise_) + ", seed=" + std::to_string(seed_) + "): " + what),
      sigma(sigma_), K(K_), noise(noise_), seed(seed_) {}

SweepContext::SweepContext(SweepConfig config)
    : config_(std::move(config)),
      source_(make_source_field(config_.source, config_.n_vol, config_.R_hat)),
      sphere_(SphereGrid::make(config_.R, config_.n_sphere, config_.sphere_rule)),
      directions_(fibonacci_directions(config_.n_dir)) {}

const CauchyDataset& SweepContext::clean_dataset(double sigma, double K) {
    const std::pair<double, double> key{sigma, K};
    if (!cached_key_ || *cached_key_ != key) {
        cached_.reset();
        const auto freqs = FrequencyGrid::make(config_.delta, K, config_.nk, config_.spacing);
        cached_ = forward::synthesize_dataset(source_, sphere_, freqs, sigma);
        cached_key_ = key;
    }
    return *cached_;
}

StabilityRecord SweepContext::run_cell(double sigma, double K, double noise, std::uint64_t seed) {
    try {
        const auto noisy = add_noise(clean_dataset(sigma, K), noise, seed);
        const auto samples = sample_fourier(noisy, directions_);
        const auto rec = reconstruct(samples, source_);
        StabilityRecord r;
        r.sigma = sigma;
        r.K = K;
        r.noise = noise;
        r.seed = seed;
        r.epsilon = epsilon_data(noisy);
        r.rel_error = relative_l2_error(rec.field, source_);
        r.Q = config_.Q ? *config_.Q : std::sqrt(source_.l2_norm_sq());
        r.n = config_.smoothness ? *config_.smoothness : source_.smoothness();
        r.imag_residue = rec.max_imag_residue;
        return r;
    } catch (const std::exception& e) {
        throw SweepCellError(sigma, K, noise, seed, e.what());
    }
}

std::vector<StabilityRecord> stability_sweep(const SweepConfig& config) {
    SweepContext ctx(config);
    std::vector<StabilityRecord> out;
    for (double sigma : config.sigmas)
        for (double K : config.Ks)
            for (double noise : config.noise_levels)
                for (auto seed : config.seeds) out.push_back(ctx.run_cell(sigma, K, noise, seed));
    return out;
}

}  // namespace biplate::inverse
