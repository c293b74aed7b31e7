#include "biplate/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <boost/numeric/odeint.hpp>

#include "biplate/forward.hpp"
#include "biplate/inverse.hpp"
#include "json.hpp"

namespace biplate::oracles {

OracleResult make_result(std::string name, double measured, std::string relation, double bound, std::string detail) {
    OracleResult r{std::move(name), measured, bound, std::move(relation), false, std::move(detail)};
    if (r.relation == "<") r.pass = measured < bound;
    else if (r.relation == "<=") r.pass = measured <= bound;
    else if (r.relation == ">=") r.pass = measured >= bound;
    else throw std::logic_error("make_result: unknown relation " + r.relation);
    return r;
}

// ---------------------------------------------------------------------------

std::vector<GreenIdentitySample> green_identity_samples(const GreenIdentityParams& p) {
    const auto f = make_source_field(p.source, p.n_vol, p.R_hat);
    const auto grid = SphereGrid::make(p.R, p.n_sphere, p.rule);
    const auto dirs = fibonacci_directions(p.n_dir);
    std::vector<GreenIdentitySample> out;
    for (double k : p.ks) {
        auto trace = forward::synthesize_cauchy(f, grid, k, p.sigma);
        if (p.data_scale != 1.0) {
            for (auto& v : trace.u) v *= p.data_scale;
            for (auto& v : trace.lap_u) v *= p.data_scale;
            for (auto& g : trace.grad_u)
                for (auto& v : g) v *= p.data_scale;
            for (auto& g : trace.grad_lap_u)
                for (auto& v : g) v *= p.data_scale;
        }
        const cplx kappa = kappa_of(k, p.sigma);
        for (const auto& d : dirs) {
            GreenIdentitySample s;
            s.k = k;
            s.direction = d;
            s.boundary = inverse::boundary_functional(trace, grid, d, k, p.sigma);
            cplx vol{};
            const auto& pts = f.active_points();
            const auto& w = f.active_weights();
            for (std::size_t i = 0; i < pts.size(); ++i) vol += w[i] * std::exp(cplx(0.0, -1.0) * kappa * dot(d, pts[i]));
            s.volume = vol;
            s.rel_error = std::abs(s.boundary - vol) / std::abs(vol);
            out.push_back(s);
        }
    }
    return out;
}

OracleResult green_identity_oracle(const GreenIdentityParams& p) {
    const auto samples = green_identity_samples(p);
    double worst = 0.0, worst_k = 0.0;
    for (const auto& s : samples)
        if (s.rel_error > worst) worst = s.rel_error, worst_k = s.k;
    std::ostringstream os;
    os << samples.size() << " samples, worst at k=" << worst_k;
    return make_result("green_identity", worst, "<", kGreenIdentityTol, os.str());
}

// ---------------------------------------------------------------------------

namespace {

class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : gen_(seed) {}
    double operator()(double lo, double hi) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace

std::vector<MultiplierTriple> multiplier_triples(const MultiplierOracleParams& p) {
    Uniform rnd(p.seed);
    std::vector<MultiplierTriple> out;
    // A few exact boundary points first: q = 0 and |q| t^2 = 1.
    for (double sigma : {0.5, 1.0, 2.0}) {
        const double a = 0.5 * sigma;
        out.push_back({3.0, std::sqrt(a), sigma});
        const double xi_edge = std::pow(a * a + 1.0 / 4.0, 0.25);  // |q| t^2 = 1 at t = 2
        out.push_back({2.0, xi_edge, sigma});
    }
    int regime = 0;
    while (out.size() < p.n_triples) {
        const MultiplierTriple c{rnd(0.0, p.t_max), rnd(0.0, p.xi_max), rnd(0.0, p.sigma_max)};
        const double a = 0.5 * c.sigma, q = a * a - std::pow(c.xi, 4);
        const bool series = std::abs(q) * c.t * c.t <= 1.0;
        const int r = series ? 0 : (q > 0.0 ? 1 : 2);
        if (r != regime) continue;
        out.push_back(c);
        regime = (regime + 1) % 3;
    }
    return out;
}

timedomain::MultiplierValues integrate_multiplier(double t, double xi, double sigma) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 2>;
    const double xi4 = std::pow(xi, 4);
    State s{0.0, 1.0};
    if (t > 0.0) {
        auto rhs = [&](const State& y, State& dy, double) {
            dy[0] = y[1];
            dy[1] = -sigma * y[1] - xi4 * y[0];
        };
        auto stepper = odeint::make_controlled(1e-14, 1e-14, odeint::runge_kutta_fehlberg78<State>());
        odeint::integrate_adaptive(stepper, rhs, s, 0.0, t, std::min(1e-3, t));
    }
    return {s[0], s[1], -sigma * s[1] - xi4 * s[0]};
}

MultiplierOracleReport multiplier_oracle_report(const MultiplierOracleParams& p) {
    MultiplierOracleReport rep;
    for (const auto& c : multiplier_triples(p)) {
        const auto got = timedomain::multiplier_values(c.t, c.xi, c.sigma);
        const auto ref = integrate_multiplier(c.t, c.xi, c.sigma);
        const double err =
            std::max({std::abs(got.m - ref.m), std::abs(got.dm - ref.dm), std::abs(got.d2m - ref.d2m)});
        if (err > rep.max_abs_error) {
            rep.max_abs_error = err;
            rep.worst = c;
        }
        const double scale = std::max({1.0, std::abs(got.d2m), c.sigma * std::abs(got.dm), std::pow(c.xi, 4) * std::abs(got.m)});
        const double identity = std::abs(got.d2m + c.sigma * got.dm + std::pow(c.xi, 4) * got.m) / scale;
        rep.max_identity_residual = std::max(rep.max_identity_residual, identity);
    }
    return rep;
}

std::vector<OracleResult> multiplier_oracle(const MultiplierOracleParams& p) {
    const auto rep = multiplier_oracle_report(p);
    std::ostringstream os;
    os << p.n_triples << " triples, worst at (t, xi, sigma) = (" << rep.worst.t << ", " << rep.worst.xi << ", "
       << rep.worst.sigma << ")";
    return {make_result("multiplier_vs_ode", rep.max_abs_error, "<", kMultiplierTol, os.str()),
            make_result("multiplier_ode_identity", rep.max_identity_residual, "<", kOdeIdentityTol,
                        "|m'' + sigma m' + xi^4 m| / max(1, term sizes)")};
}

// ---------------------------------------------------------------------------

CrossSolverReport cross_solver_report(const CrossSolverParams& p) {
    using namespace timedomain;
    const auto f = make_source_field(p.source, p.n_vol, p.R_hat);
    const auto box = make_box_field(f, p.box, p.sigma);
    const auto sphere = SphereGrid::fibonacci(p.R, p.n_points);
    const auto times = uniform_times(0.0, p.T_max, p.dt);
    const FieldKind kinds[1] = {FieldKind::U};
    const auto series = evolve_at_points(box, sphere.points(), times, kinds, p.guard_ratio);

    CrossSolverReport rep;
    for (std::size_t q = 0; q < p.nk; ++q)
        rep.k.push_back(p.nk == 1 ? p.k_lo : p.k_lo + (p.k_hi - p.k_lo) * static_cast<double>(q) / static_cast<double>(p.nk - 1));
    const auto uh = time_to_frequency(series, rep.k);
    for (std::size_t q = 0; q < rep.k.size(); ++q)
        for (std::size_t i = 0; i < sphere.size(); ++i) {
            const cplx ref = forward::field_at(f, sphere.points()[i], rep.k[q], p.sigma);
            const double e = std::abs(uh[q * sphere.size() + i] - ref) / std::abs(ref);
            rep.rel_error.push_back(e);
            rep.max_rel_error = std::max(rep.max_rel_error, e);
        }
    for (double g : series.guard_ratios) rep.max_guard_ratio = std::max(rep.max_guard_ratio, g);
    return rep;
}

OracleResult cross_solver_oracle(const CrossSolverParams& p) {
    const auto rep = cross_solver_report(p);
    std::ostringstream os;
    os << rep.rel_error.size() << " (point, k) pairs, max guard ratio " << rep.max_guard_ratio;
    return make_result("cross_solver", rep.max_rel_error, "<=", kCrossSolverTol, os.str());
}

// ---------------------------------------------------------------------------

ResidualOrderReport residual_order_report(const ResidualOrderParams& p) {
    const auto f = make_source_field(p.source, p.n_vol, p.R_hat);
    ResidualOrderReport rep;
    double h = p.h0;
    for (std::size_t l = 0; l < p.levels; ++l, h *= 0.5) {
        const auto r = forward::residual_check(f, p.k, p.sigma, p.centres, h, p.outer_radius);
        rep.h.push_back(h);
        rep.residual.push_back(r.normalized());
    }
    rep.min_order = std::numeric_limits<double>::infinity();
    for (std::size_t l = 1; l < rep.h.size(); ++l) {
        const double o = std::log2(rep.residual[l - 1] / rep.residual[l]);
        rep.order.push_back(o);
        rep.min_order = std::min(rep.min_order, o);
    }
    return rep;
}

OracleResult residual_order_oracle(const ResidualOrderParams& p) {
    const auto rep = residual_order_report(p);
    std::ostringstream os;
    os << "normalized residuals";
    for (double r : rep.residual) os << ' ' << r;
    return make_result("pde_residual_order", rep.min_order, ">=", kResidualOrderMin, os.str());
}

// ---------------------------------------------------------------------------

std::string mu_high_precision(double z, double delta, double K, double d) {
    using boost::multiprecision::cpp_dec_float_50;
    const cpp_dec_float_50 pi = boost::math::constants::pi<cpp_dec_float_50>();
    const cpp_dec_float_50 Z(z), D(d), a = cpp_dec_float_50(K) - cpp_dec_float_50(delta);
    const cpp_dec_float_50 pref = 64 * a * D / (3 * pi * pi * (a * a + 4 * D * D));
    const cpp_dec_float_50 mu = pref * exp(pi / (2 * D) * (a / 2 - Z));
    return mu.str(40, std::ios_base::scientific);
}

OracleResult mu_oracle(double z, double delta, double K, double d) {
    const double ref = std::stod(mu_high_precision(z, delta, K, d));
    const double got = inverse::mu_lower_bound(z, inverse::AnalyticContinuationParams{delta, K, d});
    std::ostringstream os;
    os.precision(17);
    os << "mu = " << got << ", reference " << ref;
    return make_result("mu_formula", std::abs(got - ref) / std::abs(ref), "<", kMuRelTol, os.str());
}

// ---------------------------------------------------------------------------

bool VerifyReport::pass() const {
    return std::all_of(results.begin(), results.end(), [](const OracleResult& r) { return r.pass; });
}

VerifyReport run_all_oracles() {
    VerifyReport rep;
    rep.results.push_back(green_identity_oracle());
    for (auto& r : multiplier_oracle()) rep.results.push_back(std::move(r));
    rep.results.push_back(cross_solver_oracle());
    rep.results.push_back(residual_order_oracle());
    rep.results.push_back(mu_oracle());
    return rep;
}

std::string verify_report_json(const VerifyReport& r) {
    nlohmann::ordered_json j;
    j["pass"] = r.pass();
    auto arr = nlohmann::ordered_json::array();
    for (const auto& o : r.results)
        arr.push_back({{"name", o.name},
                       {"measured", o.measured},
                       {"relation", o.relation},
                       {"bound", o.bound},
                       {"pass", o.pass},
                       {"detail", o.detail}});
    j["oracles"] = arr;
    return j.dump(2) + "\n";
}

}  // namespace biplate::oracles
