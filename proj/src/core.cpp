#include "biplate/core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace biplate {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr int kSmoothUnbounded = 100;

cplx principal_fourth_root(cplx w) {
    return std::polar(std::sqrt(std::sqrt(std::abs(w))), 0.25 * std::arg(w));
}

double pow_int(double x, int m) {
    double r = 1.0;
    for (int i = 0; i < m; ++i) r *= x;
    return r;
}

}  // namespace

cplx kappa_of(cplx k, double sigma) {
    if (k == cplx(0.0, 0.0)) throw ValidationError("kappa_of: k must be nonzero");
    if (!(sigma >= 0.0)) throw ValidationError("kappa_of: sigma must be >= 0");
    const cplx w = k * k + kI * k * sigma;
    if (w.imag() == 0.0 && w.real() <= 0.0)
        throw ValidationError("kappa_of: k^2 + i k sigma lies on the branch cut (negative real axis)");
    if (k.real() >= 0.0) return principal_fourth_root(w);
    const cplx mirrored = -std::conj(k);
    return kI * std::conj(principal_fourth_root(mirrored * mirrored + kI * mirrored * sigma));
}

cplx kappa_derivative(cplx k, double sigma) {
    const cplx kappa = kappa_of(k, sigma);
    return (2.0 * k + kI * sigma) / (4.0 * kappa * kappa * kappa);
}

// ---------------------------------------------------------------------------

SphereGrid::SphereGrid(double radius, std::vector<Vec3> points, std::vector<double> weights, SphereRule rule)
    : radius_(radius), points_(std::move(points)), weights_(std::move(weights)), rule_(rule) {
    if (!(radius_ > 0.0)) throw ValidationError("SphereGrid: radius must be positive");
    if (points_.empty()) throw ValidationError("SphereGrid: no points");
    if (points_.size() != weights_.size()) throw ValidationError("SphereGrid: points/weights size mismatch");
    const double tol = 1e-12 * std::max(1.0, radius_);
    normals_.reserve(points_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double r = norm(points_[i]);
        if (std::abs(r - radius_) > tol) throw ValidationError("SphereGrid: point off the sphere");
        if (!(weights_[i] > 0.0)) throw ValidationError("SphereGrid: non-positive weight");
        normals_.push_back((1.0 / r) * points_[i]);
        total += weights_[i];
    }
    const double area = 4.0 * kPi * radius_ * radius_;
    if (std::abs(total - area) > 1e-10 * area) throw ValidationError("SphereGrid: weights do not sum to 4 pi R^2");
}

std::vector<Vec3> fibonacci_directions(std::size_t n) {
    if (n == 0) throw ValidationError("fibonacci_directions: n must be positive");
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        Vec3 d{rho * std::cos(phi), rho * std::sin(phi), z};
        const double len = norm(d);
        dirs[i] = (1.0 / len) * d;
    }
    return dirs;
}

SphereGrid SphereGrid::fibonacci(double radius, std::size_t n) {
    auto pts = fibonacci_directions(n);
    for (auto& p : pts) p = radius * p;
    std::vector<double> w(n, 4.0 * kPi * radius * radius / static_cast<double>(n));
    return SphereGrid(radius, std::move(pts), std::move(w), SphereRule::Fibonacci);
}

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n == 0) throw ValidationError("gauss_legendre: n must be positive");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t j = 2; j <= n; ++j) {
                const double dj = static_cast<double>(j);
                const double p2 = ((2.0 * dj - 1.0) * x * p1 - (dj - 1.0) * p0) / dj;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = dn * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged root.
        double p0 = 1.0, p1 = x;
        for (std::size_t j = 2; j <= n; ++j) {
            const double dj = static_cast<double>(j);
            const double p2 = ((2.0 * dj - 1.0) * x * p1 - (dj - 1.0) * p0) / dj;
            p0 = p1;
            p1 = p2;
        }
        dp = (n == 1) ? 1.0 : dn * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

SphereGrid SphereGrid::gauss_product(double radius, std::size_t n_theta, std::size_t n_phi) {
    if (n_theta == 0 || n_phi == 0) throw ValidationError("gauss_product: counts must be positive");
    std::vector<double> z, wz;
    gauss_legendre(n_theta, z, wz);
    std::vector<Vec3> pts;
    std::vector<double> w;
    pts.reserve(n_theta * n_phi);
    w.reserve(n_theta * n_phi);
    const double dphi = 2.0 * kPi / static_cast<double>(n_phi);
    for (std::size_t i = 0; i < n_theta; ++i) {
        const double rho = std::sqrt(std::max(0.0, 1.0 - z[i] * z[i]));
        for (std::size_t j = 0; j < n_phi; ++j) {
            const double phi = (static_cast<double>(j) + 0.5) * dphi;
            Vec3 d{rho * std::cos(phi), rho * std::sin(phi), z[i]};
            d = (1.0 / norm(d)) * d;
            pts.push_back(radius * d);
            w.push_back(radius * radius * wz[i] * dphi);
        }
    }
    return SphereGrid(radius, std::move(pts), std::move(w), SphereRule::GaussProduct);
}

SphereGrid SphereGrid::gauss_product(double radius, std::size_t n) {
    const auto n_theta = static_cast<std::size_t>(std::max(2.0, std::round(std::sqrt(static_cast<double>(n) / 2.0))));
    return gauss_product(radius, n_theta, 2 * n_theta);
}

SphereGrid SphereGrid::make(double radius, std::size_t n, SphereRule rule) {
    return rule == SphereRule::Fibonacci ? fibonacci(radius, n) : gauss_product(radius, n);
}

SphereGrid SphereGrid::from_points(double radius, std::vector<Vec3> points, std::vector<double> weights,
                                   SphereRule rule) {
    return SphereGrid(radius, std::move(points), std::move(weights), rule);
}

// ---------------------------------------------------------------------------

double gaussian_support_factor() { return std::sqrt(-std::log(kGaussianCutoff)); }

SourceField::SourceField(double support_radius, std::size_t n_per_axis, std::vector<double> values, int smoothness)
    : support_radius_(support_radius), n_(n_per_axis), h_(0.0), values_(std::move(values)), smoothness_(smoothness) {
    if (!(support_radius_ > 0.0)) throw ValidationError("SourceField: support radius must be positive");
    if (n_ == 0) throw ValidationError("SourceField: n_per_axis must be positive");
    if (values_.size() != n_ * n_ * n_) throw ValidationError("SourceField: value count must be n^3");
    h_ = 2.0 * support_radius_ / static_cast<double>(n_);
    const double w = cell_volume();
    for (std::size_t idx = 0; idx < values_.size(); ++idx) {
        const double v = values_[idx];
        if (!std::isfinite(v)) throw ValidationError("SourceField: non-finite value");
        if (v == 0.0) continue;
        const Vec3 p = point(idx);
        if (norm(p) > support_radius_) throw ValidationError("SourceField: nonzero value outside the support ball");
        active_points_.push_back(p);
        active_weights_.push_back(w * v);
    }
}

SourceField SourceField::zeros(double support_radius, std::size_t n_per_axis) {
    return SourceField(support_radius, n_per_axis, std::vector<double>(n_per_axis * n_per_axis * n_per_axis, 0.0),
                       kSmoothUnbounded);
}

Vec3 SourceField::point(std::size_t flat) const {
    const std::size_t l = flat % n_;
    const std::size_t j = (flat / n_) % n_;
    const std::size_t i = flat / (n_ * n_);
    return {coordinate(i), coordinate(j), coordinate(l)};
}

double SourceField::l2_norm_sq() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s * cell_volume();
}

double SourceField::l1_norm() const {
    double s = 0.0;
    for (double v : values_) s += std::abs(v);
    return s * cell_volume();
}

bool SourceField::same_geometry(const SourceField& other) const {
    return n_ == other.n_ && support_radius_ == other.support_radius_;
}

int smoothness_label(const SourceSpec& spec) {
    int label = kSmoothUnbounded;
    for (const auto& b : spec)
        if (const auto* p = std::get_if<PolynomialBump>(&b)) label = std::min(label, p->exponent);
    return label;
}

SourceField make_source_field(const SourceSpec& spec, std::size_t n_per_axis, double support_radius) {
    if (n_per_axis == 0) throw ValidationError("make_source_field: n_per_axis must be positive");
    if (!(support_radius > 0.0)) throw ValidationError("make_source_field: support radius must be positive");
    const double slack = 1e-12 * support_radius;
    for (const auto& b : spec) {
        if (const auto* g = std::get_if<GaussianBump>(&b)) {
            if (!(g->width > 0.0)) throw ValidationError("gaussian bump: width must be positive");
            if (norm(g->center) + g->width * gaussian_support_factor() > support_radius + slack)
                throw ValidationError("gaussian bump: cutoff sphere crosses |x| = R^ (reduce width or move center)");
        } else {
            const auto& p = std::get<PolynomialBump>(b);
            if (!(p.radius > 0.0)) throw ValidationError("polynomial bump: radius must be positive");
            if (p.exponent < 1) throw ValidationError("polynomial bump: exponent must be >= 1");
            if (norm(p.center) + p.radius > support_radius + slack)
                throw ValidationError("polynomial bump: support crosses |x| = R^");
        }
    }

    const std::size_t n = n_per_axis;
    std::vector<double> values(n * n * n, 0.0);
    const double h = 2.0 * support_radius / static_cast<double>(n);
    const double cutoff = gaussian_support_factor();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t l = 0; l < n; ++l) {
                const Vec3 x{-support_radius + (i + 0.5) * h, -support_radius + (j + 0.5) * h,
                             -support_radius + (l + 0.5) * h};
                if (norm(x) > support_radius) continue;
                double v = 0.0;
                for (const auto& b : spec) {
                    if (const auto* g = std::get_if<GaussianBump>(&b)) {
                        const double s = norm(x - g->center) / g->width;
                        if (s < cutoff) v += g->amplitude * std::exp(-s * s);
                    } else {
                        const auto& p = std::get<PolynomialBump>(b);
                        const double q = dot(x - p.center, x - p.center) / (p.radius * p.radius);
                        if (q < 1.0) v += p.amplitude * pow_int(1.0 - q, p.exponent);
                    }
                }
                values[(i * n + j) * n + l] = v;
            }
        }
    }
    return SourceField(support_radius, n, std::move(values), smoothness_label(spec));
}

// ---------------------------------------------------------------------------

FrequencyGrid::FrequencyGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw ValidationError("FrequencyGrid: need at least two nodes");
    if (!(nodes_.front() > 0.0)) throw ValidationError("FrequencyGrid: delta must be positive");
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (!(nodes_[i] > nodes_[i - 1])) throw ValidationError("FrequencyGrid: nodes must be strictly increasing");
    const std::size_t n = nodes_.size();
    weights_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double half = 0.5 * (nodes_[i + 1] - nodes_[i]);
        weights_[i] += half;
        weights_[i + 1] += half;
    }
}

FrequencyGrid FrequencyGrid::uniform(double delta, double K, std::size_t n) {
    if (n < 2 || !(K > delta)) throw ValidationError("FrequencyGrid::uniform: need n >= 2 and K > delta");
    std::vector<double> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = delta + (K - delta) * static_cast<double>(i) / static_cast<double>(n - 1);
    nodes.back() = K;
    return FrequencyGrid(std::move(nodes));
}

FrequencyGrid FrequencyGrid::sqrt_spaced(double delta, double K, std::size_t n) {
    if (n < 2 || !(K > delta) || !(delta > 0.0))
        throw ValidationError("FrequencyGrid::sqrt_spaced: need n >= 2 and K > delta > 0");
    const double a = std::sqrt(delta), b = std::sqrt(K);
    std::vector<double> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
        nodes[i] = s * s;
    }
    nodes.front() = delta;
    nodes.back() = K;
    return FrequencyGrid(std::move(nodes));
}

FrequencyGrid FrequencyGrid::make(double delta, double K, std::size_t n, FrequencySpacing spacing) {
    return spacing == FrequencySpacing::Linear ? uniform(delta, K, n) : sqrt_spaced(delta, K, n);
}

FrequencyGrid FrequencyGrid::from_nodes(std::vector<double> nodes) { return FrequencyGrid(std::move(nodes)); }

double frequency_integral(std::span<const double> values, const FrequencyGrid& grid) {
    if (values.size() != grid.size()) throw ValidationError("frequency_integral: one value per node required");
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += grid.weights()[i] * values[i];
    return s;
}

double partial_frequency_integral(std::span<const double> values, const FrequencyGrid& grid, double k) {
    if (values.size() != grid.size()) throw ValidationError("partial_frequency_integral: one value per node required");
    const auto& x = grid.nodes();
    if (k < x.front() || k > x.back()) throw ValidationError("partial_frequency_integral: k outside [delta, K]");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        if (x[i + 1] <= k) {
            s += 0.5 * (x[i + 1] - x[i]) * (values[i] + values[i + 1]);
            continue;
        }
        if (x[i] < k) {
            const double t = (k - x[i]) / (x[i + 1] - x[i]);
            const double vk = values[i] + t * (values[i + 1] - values[i]);
            s += 0.5 * (k - x[i]) * (values[i] + vk);
        }
        break;
    }
    return s;
}

// ---------------------------------------------------------------------------

CauchyTrace CauchyTrace::zeros(double k, std::size_t n) {
    CauchyTrace t;
    t.k = k;
    t.u.assign(n, cplx{});
    t.grad_u.assign(n, CVec3{});
    t.lap_u.assign(n, cplx{});
    t.grad_lap_u.assign(n, CVec3{});
    return t;
}

bool CauchyTrace::consistent() const {
    const std::size_t n = u.size();
    return grad_u.size() == n && lap_u.size() == n && grad_lap_u.size() == n;
}

double boundary_norm_sq(const CauchyTrace& trace, const SphereGrid& grid) {
    if (!trace.consistent() || trace.size() != grid.size())
        throw ValidationError("boundary_norm_sq: trace and sphere grid sizes differ");
    const double k2 = trace.k * trace.k;
    const double k4 = k2 * k2;
    double s = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& g = trace.grad_u[i];
        const auto& gl = trace.grad_lap_u[i];
        const double grad2 = std::norm(g[0]) + std::norm(g[1]) + std::norm(g[2]);
        const double gradlap2 = std::norm(gl[0]) + std::norm(gl[1]) + std::norm(gl[2]);
        const double integrand =
            (k4 + k2) * std::norm(trace.u[i]) + k2 * grad2 + (k2 + 1.0) * std::norm(trace.lap_u[i]) + gradlap2;
        s += grid.weights()[i] * integrand;
    }
    return s;
}

void CauchyDataset::validate() const {
    if (traces.size() != frequencies.size())
        throw ValidationError("CauchyDataset: trace count differs from frequency node count");
    for (std::size_t j = 0; j < traces.size(); ++j) {
        if (!traces[j].consistent() || traces[j].size() != sphere.size())
            throw ValidationError("CauchyDataset: trace " + std::to_string(j) + " has the wrong point count");
        if (traces[j].k != frequencies.nodes()[j])
            throw ValidationError("CauchyDataset: trace " + std::to_string(j) + " frequency differs from grid node");
    }
}

}  // namespace biplate
