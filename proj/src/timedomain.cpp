#include "biplate/timedomain.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "biplate/parallel.hpp"

namespace biplate::timedomain {

namespace {

constexpr cplx kI{0.0, 1.0};

// Spectral factor of a field kind: family selects m, m', m'' or -|xi|^2 times
// m or m'; axis >= 0 adds the factor i xi_axis.
struct KindSpec {
    int family;
    int axis;
};

KindSpec kind_spec(FieldKind k) {
    switch (k) {
        case FieldKind::U: return {0, -1};
        case FieldKind::Ut: return {1, -1};
        case FieldKind::Utt: return {2, -1};
        case FieldKind::Ux: return {0, 0};
        case FieldKind::Uy: return {0, 1};
        case FieldKind::Uz: return {0, 2};
        case FieldKind::LapU: return {3, -1};
        case FieldKind::LapUx: return {3, 0};
        case FieldKind::LapUy: return {3, 1};
        case FieldKind::LapUz: return {3, 2};
        case FieldKind::Utx: return {1, 0};
        case FieldKind::Uty: return {1, 1};
        case FieldKind::Utz: return {1, 2};
        case FieldKind::LapUt: return {4, -1};
    }
    throw ValidationError("unknown field kind");
}

double family_value(int family, const MultiplierValues& v, double xi2) {
    switch (family) {
        case 0: return v.m;
        case 1: return v.dm;
        case 2: return v.d2m;
        case 3: return -xi2 * v.m;
        default: return -xi2 * v.dm;
    }
}

// Distinct |idx|^2 values of the nonzero modes.
struct ShellTable {
    std::vector<int> shell_of_sq;  // -1 when no mode has that |idx|^2
    std::vector<double> xi;        // |xi| per shell
};

ShellTable build_shells(const SpectralBoxField& field) {
    const std::size_t n = field.n();
    const int h = static_cast<int>(n / 2);
    ShellTable t;
    t.shell_of_sq.assign(static_cast<std::size_t>(3 * h * h + 1), -1);
    std::vector<char> used(t.shell_of_sq.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < n; ++l) {
                if (field.coeffs()[field.index(i, j, l)] == cplx{}) continue;
                const int a = field.mode_index(i), b = field.mode_index(j), c = field.mode_index(l);
                used[static_cast<std::size_t>(a * a + b * b + c * c)] = 1;
            }
    for (std::size_t sq = 0; sq < used.size(); ++sq) {
        if (!used[sq]) continue;
        t.shell_of_sq[sq] = static_cast<int>(t.xi.size());
        t.xi.push_back(field.xi_step() * std::sqrt(static_cast<double>(sq)));
    }
    return t;
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------

MultiplierValues multiplier_values(double t, double xi_abs, double sigma) {
    if (!(t >= 0.0)) throw ValidationError("multiplier: t must be nonnegative");
    if (!(xi_abs >= 0.0) || !(sigma >= 0.0)) throw ValidationError("multiplier: |xi| and sigma must be nonnegative");
    const double a = 0.5 * sigma;
    const double x4 = xi_abs * xi_abs * xi_abs * xi_abs;
    const double q = a * a - x4;
    const double z = q * t * t;

    // ES = e^{-at} S(t), EC = e^{-at} C(t) with S'' = q S, S(0) = 0, S'(0) = 1, C = S'.
    double ES, EC;
    if (std::abs(z) <= 1.0) {
        double ts = 1.0, tc = 1.0, s = 1.0, c = 1.0;
        for (int k = 1; k <= 14; ++k) {
            ts *= z / (2.0 * k * (2.0 * k + 1.0));
            tc *= z / ((2.0 * k - 1.0) * (2.0 * k));
            s += ts;
            c += tc;
        }
        const double e = std::exp(-a * t);
        ES = e * t * s;
        EC = e * c;
    } else if (q > 0.0) {
        const double r = std::sqrt(q);
        const double ep = std::exp(-x4 / (r + a) * t);  // e^{(r - a) t}
        const double em = std::exp(-(r + a) * t);
        ES = (ep - em) / (2.0 * r);
        EC = 0.5 * (ep + em);
    } else {
        const double w = std::sqrt(-q);
        const double e = std::exp(-a * t);
        ES = e * std::sin(w * t) / w;
        EC = e * std::cos(w * t);
    }
    return {ES, EC - a * ES, (q + a * a) * ES - 2.0 * a * EC};
}

double multiplier(double t, double xi_abs, double sigma) { return multiplier_values(t, xi_abs, sigma).m; }

double multiplier_dt(double t, double xi_abs, double sigma, int order) {
    const auto v = multiplier_values(t, xi_abs, sigma);
    if (order == 1) return v.dm;
    if (order == 2) return v.d2m;
    throw ValidationError("multiplier_dt: order must be 1 or 2");
}

// ---------------------------------------------------------------------------

SpectralBoxField::SpectralBoxField(BoxParams box, double sigma, std::vector<cplx> coeffs)
    : box_(box), sigma_(sigma), coeffs_(std::move(coeffs)) {
    if (!(box_.L > 0.0)) throw ValidationError("SpectralBoxField: L must be positive");
    if (box_.n < 2 || box_.n % 2 != 0) throw ValidationError("SpectralBoxField: n must be even and >= 2");
    if (!(sigma_ >= 0.0)) throw ValidationError("SpectralBoxField: sigma must be nonnegative");
    if (coeffs_.size() != box_.n * box_.n * box_.n) throw ValidationError("SpectralBoxField: coefficient count must be n^3");
}

double SpectralBoxField::xi_step() const { return kPi / box_.L; }

SpectralBoxField make_box_field(const SourceField& f, const BoxParams& box, double sigma) {
    if (!(box.L > 0.0) || box.n < 2 || box.n % 2 != 0) throw ValidationError("make_box_field: need L > 0 and even n");
    if (!(f.support_radius() <= 0.5 * box.L))
        throw ValidationError("make_box_field: source support must fit in the box with margin L/2");

    const std::size_t n = box.n, nv = f.n_per_axis();
    const double dxi = kPi / box.L;
    // E[i * nv + v] = exp(-i xi_i y_v)
    std::vector<cplx> E(n * nv);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = dxi * (static_cast<double>(i) - static_cast<double>(n / 2));
        for (std::size_t v = 0; v < nv; ++v) {
            const double ph = xi * f.coordinate(v);
            E[i * nv + v] = cplx(std::cos(ph), -std::sin(ph));
        }
    }

    const double w = f.cell_volume();
    const auto& vals = f.values();
    // Pass over the last axis: T1[(a, b), l'] = sum_l W[a, b, l] E[l', l].
    std::vector<cplx> T1(nv * nv * n);
    parallel_for(nv * nv, [&](std::size_t ab) {
        const double* row = &vals[ab * nv];
        bool any = false;
        for (std::size_t v = 0; v < nv; ++v) any = any || row[v] != 0.0;
        if (!any) return;
        for (std::size_t c = 0; c < n; ++c) {
            cplx s{};
            for (std::size_t v = 0; v < nv; ++v) s += (w * row[v]) * E[c * nv + v];
            T1[ab * n + c] = s;
        }
    });
    // Middle axis: T2[a, j', l'] = sum_b T1[a, b, l'] E[j', b].
    std::vector<cplx> T2(nv * n * n);
    parallel_for(nv, [&](std::size_t a) {
        for (std::size_t b = 0; b < nv; ++b) {
            const cplx* src = &T1[(a * nv + b) * n];
            bool any = false;
            for (std::size_t c = 0; c < n; ++c) any = any || src[c] != cplx{};
            if (!any) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const cplx e = E[j * nv + b];
                cplx* dst = &T2[(a * n + j) * n];
                for (std::size_t c = 0; c < n; ++c) dst[c] += e * src[c];
            }
        }
    });
    // First axis, normalization, Nyquist and cutoff.
    const double scale = 1.0 / std::pow(2.0 * box.L, 3);
    const double cut2 = box.xi_cut ? (*box.xi_cut) * (*box.xi_cut) : std::numeric_limits<double>::infinity();
    std::vector<cplx> coeffs(n * n * n);
    parallel_for(n, [&](std::size_t i) {
        if (i == 0) return;
        const double xa = dxi * (static_cast<double>(i) - static_cast<double>(n / 2));
        for (std::size_t j = 1; j < n; ++j) {
            const double xb = dxi * (static_cast<double>(j) - static_cast<double>(n / 2));
            for (std::size_t l = 1; l < n; ++l) {
                const double xc = dxi * (static_cast<double>(l) - static_cast<double>(n / 2));
                if (xa * xa + xb * xb + xc * xc > cut2) continue;
                cplx s{};
                for (std::size_t a = 0; a < nv; ++a) s += E[i * nv + a] * T2[(a * n + j) * n + l];
                coeffs[(i * n + j) * n + l] = scale * s;
            }
        }
    });
    return SpectralBoxField(box, sigma, std::move(coeffs));
}

// ---------------------------------------------------------------------------

const char* field_kind_name(FieldKind kind) {
    switch (kind) {
        case FieldKind::U: return "U";
        case FieldKind::Ut: return "Ut";
        case FieldKind::Utt: return "Utt";
        case FieldKind::Ux: return "Ux";
        case FieldKind::Uy: return "Uy";
        case FieldKind::Uz: return "Uz";
        case FieldKind::LapU: return "LapU";
        case FieldKind::LapUx: return "LapUx";
        case FieldKind::LapUy: return "LapUy";
        case FieldKind::LapUz: return "LapUz";
        case FieldKind::Utx: return "Utx";
        case FieldKind::Uty: return "Uty";
        case FieldKind::Utz: return "Utz";
        case FieldKind::LapUt: return "LapUt";
    }
    return "?";
}

WrapAroundError::WrapAroundError(double time_, double ratio_)
    : std::runtime_error("wrap-around guard tripped at t = " + std::to_string(time_) +
                         " (boundary/sup ratio " + std::to_string(ratio_) + ")"),
      time(time_), ratio(ratio_) {}

const std::vector<double>& Snapshot::field(FieldKind kind) const {
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (kinds[i] == kind) return fields[i];
    throw ValidationError(std::string("snapshot does not hold field ") + field_kind_name(kind));
}

void evolve_each(const SpectralBoxField& field, std::span<const double> times, const EvolveOptions& options,
                 const std::function<void(const Snapshot&)>& sink) {
    for (double t : times)
        if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("evolve: times must be finite and nonnegative");

    const std::size_t n = field.n(), total = n * n * n;
    const double dxi = field.xi_step();
    const ShellTable shells = build_shells(field);

    std::vector<FieldKind> kinds = options.kinds;
    const bool guard = options.guard_ratio > 0.0;
    if (guard && !std::is_sorted(times.begin(), times.end()))
        throw ValidationError("evolve: times must be nondecreasing when the guard is on");
    if (guard && std::find(kinds.begin(), kinds.end(), FieldKind::U) == kinds.end()) kinds.push_back(FieldKind::U);

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
    if (!buf) throw std::bad_alloc();
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        const int ni = static_cast<int>(n);
        plan = fftw_plan_dft_3d(ni, ni, ni, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    auto cleanup = [&] {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
        fftw_free(buf);
    };

    try {
        const double global_sign = (n / 2) % 2 == 0 ? 1.0 : -1.0;
        std::vector<MultiplierValues> mv(shells.xi.size());
        double running_sup = 0.0;
        for (double t : times) {
            for (std::size_t s = 0; s < mv.size(); ++s) mv[s] = multiplier_values(t, shells.xi[s], field.sigma());
            Snapshot snap;
            snap.t = t;
            snap.kinds = kinds;
            for (FieldKind kind : kinds) {
                const KindSpec spec = kind_spec(kind);
                for (std::size_t i = 0; i < n; ++i) {
                    const int a = field.mode_index(i);
                    for (std::size_t j = 0; j < n; ++j) {
                        const int b = field.mode_index(j);
                        for (std::size_t l = 0; l < n; ++l) {
                            const int c = field.mode_index(l);
                            const std::size_t idx = field.index(i, j, l);
                            const cplx coef = field.coeffs()[idx];
                            cplx v{};
                            if (coef != cplx{}) {
                                const int sq = a * a + b * b + c * c;
                                const double xi2 = dxi * dxi * sq;
                                double g = family_value(spec.family, mv[static_cast<std::size_t>(shells.shell_of_sq[sq])], xi2);
                                v = g * coef;
                                if (spec.axis >= 0) {
                                    const int comp = spec.axis == 0 ? a : (spec.axis == 1 ? b : c);
                                    v *= kI * (dxi * comp);
                                }
                                if ((i + j + l) % 2 == 1) v = -v;
                            }
                            buf[idx][0] = v.real();
                            buf[idx][1] = v.imag();
                        }
                    }
                }
                fftw_execute(plan);
                std::vector<double> out(total);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t l = 0; l < n; ++l) {
                            const std::size_t idx = field.index(i, j, l);
                            const double sgn = ((i + j + l) % 2 == 0 ? 1.0 : -1.0) * global_sign;
                            out[idx] = sgn * buf[idx][0];
                            snap.max_imag = std::max(snap.max_imag, std::abs(buf[idx][1]));
                        }
                snap.fields.push_back(std::move(out));
            }
            if (guard) {
                const auto& u = snap.field(FieldKind::U);
                double sup = 0.0, face = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t l = 0; l < n; ++l) {
                            const double v = std::abs(u[field.index(i, j, l)]);
                            sup = std::max(sup, v);
                            if (i == 0 || j == 0 || l == 0) face = std::max(face, v);
                        }
                running_sup = std::max(running_sup, sup);
                snap.guard_ratio = running_sup > 0.0 ? face / running_sup : 0.0;
                if (snap.guard_ratio > options.guard_ratio) throw WrapAroundError(t, snap.guard_ratio);
            }
            sink(snap);
        }
    } catch (...) {
        cleanup();
        throw;
    }
    cleanup();
}

std::vector<Snapshot> evolve(const SpectralBoxField& field, std::span<const double> times, const EvolveOptions& options) {
    std::vector<Snapshot> out;
    evolve_each(field, times, options, [&](const Snapshot& s) { out.push_back(s); });
    return out;
}

// ---------------------------------------------------------------------------

const std::vector<double>& PointSeries::series(FieldKind kind) const {
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (kinds[i] == kind) return values[i];
    throw ValidationError(std::string("point series does not hold field ") + field_kind_name(kind));
}

PointSeries evolve_at_points(const SpectralBoxField& field, std::span<const Vec3> points, std::span<const double> times,
                             std::span<const FieldKind> kinds, double guard_ratio) {
    for (double t : times)
        if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("evolve_at_points: times must be finite and nonnegative");
    if (kinds.empty()) throw ValidationError("evolve_at_points: no field kinds requested");

    const std::size_t n = field.n();
    const double dxi = field.xi_step();
    const ShellTable shells = build_shells(field);
    const std::size_t ns = shells.xi.size();

    // Targets, then the box centre and probes on the box faces.
    std::vector<Vec3> all(points.begin(), points.end());
    const bool guard = guard_ratio > 0.0;
    if (guard) {
        const double L = field.L();
        all.push_back({0.0, 0.0, 0.0});
        all.push_back({-L, 0.0, 0.0});
        all.push_back({0.0, -L, 0.0});
        all.push_back({0.0, 0.0, -L});
        all.push_back({-L, -L, -L});
    }
    const std::size_t P = all.size(), NP = points.size();

    // X[(s * P + p) * 4 + c]: c = 0 -> Re sum c e^{i xi.x}, c = 1..3 -> Re sum i xi_c c e^{i xi.x}.
    std::vector<double> X(ns * P * 4, 0.0);
    parallel_for(P, [&](std::size_t p) {
        std::array<std::vector<cplx>, 3> e;
        for (int ax = 0; ax < 3; ++ax) {
            e[ax].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double ph = dxi * field.mode_index(i) * all[p][ax];
                e[ax][i] = cplx(std::cos(ph), std::sin(ph));
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int a = field.mode_index(i);
            for (std::size_t j = 0; j < n; ++j) {
                const int b = field.mode_index(j);
                const cplx eab = e[0][i] * e[1][j];
                for (std::size_t l = 0; l < n; ++l) {
                    const cplx coef = field.coeffs()[field.index(i, j, l)];
                    if (coef == cplx{}) continue;
                    const int c = field.mode_index(l);
                    const cplx v = coef * eab * e[2][l];
                    const auto s = static_cast<std::size_t>(shells.shell_of_sq[static_cast<std::size_t>(a * a + b * b + c * c)]);
                    double* x = &X[(s * P + p) * 4];
                    x[0] += v.real();
                    x[1] -= dxi * a * v.imag();
                    x[2] -= dxi * b * v.imag();
                    x[3] -= dxi * c * v.imag();
                }
            }
        }
    });

    std::vector<FieldKind> eval_kinds(kinds.begin(), kinds.end());
    std::size_t guard_slot = eval_kinds.size();
    for (std::size_t i = 0; i < eval_kinds.size(); ++i)
        if (eval_kinds[i] == FieldKind::U) guard_slot = i;
    if (guard && guard_slot == eval_kinds.size()) eval_kinds.push_back(FieldKind::U);
    std::vector<KindSpec> specs;
    for (auto k : eval_kinds) specs.push_back(kind_spec(k));
    const std::size_t nk = eval_kinds.size(), nt = times.size();

    PointSeries out;
    out.times.assign(times.begin(), times.end());
    out.points.assign(points.begin(), points.end());
    out.kinds.assign(kinds.begin(), kinds.end());
    out.values.assign(kinds.size(), std::vector<double>(nt * NP));
    std::vector<double> face_max(nt, 0.0), sup_max(nt, 0.0);

    parallel_for(nt, [&](std::size_t it) {
        const double t = times[it];
        std::vector<double> acc(nk * P, 0.0);
        for (std::size_t s = 0; s < ns; ++s) {
            const double xi = shells.xi[s];
            const MultiplierValues mv = multiplier_values(t, xi, field.sigma());
            const double* x = &X[s * P * 4];
            for (std::size_t q = 0; q < nk; ++q) {
                const double g = family_value(specs[q].family, mv, xi * xi);
                const int comp = specs[q].axis + 1;
                double* dst = &acc[q * P];
                for (std::size_t p = 0; p < P; ++p) dst[p] += g * x[p * 4 + comp];
            }
        }
        for (std::size_t q = 0; q < kinds.size(); ++q)
            std::copy(acc.begin() + static_cast<std::ptrdiff_t>(q * P), acc.begin() + static_cast<std::ptrdiff_t>(q * P + NP),
                      out.values[q].begin() + static_cast<std::ptrdiff_t>(it * NP));
        if (guard) {
            const double* u = &acc[guard_slot * P];
            double sup = 0.0, face = 0.0;
            for (std::size_t p = 0; p <= NP; ++p) sup = std::max(sup, std::abs(u[p]));
            for (std::size_t p = NP + 1; p < P; ++p) face = std::max(face, std::abs(u[p]));
            face_max[it] = face;
            sup_max[it] = std::max(sup, face);
        }
    });
    if (guard) {
        // Reference is the running sup over the series, in time order.
        std::vector<std::size_t> order(nt);
        for (std::size_t i = 0; i < nt; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
        std::vector<double> ratio(nt, 0.0);
        double running = 0.0;
        for (std::size_t it : order) {
            running = std::max(running, sup_max[it]);
            ratio[it] = running > 0.0 ? face_max[it] / running : 0.0;
            if (ratio[it] > guard_ratio) throw WrapAroundError(times[it], ratio[it]);
        }
        out.guard_ratios = std::move(ratio);
    }
    return out;
}

std::vector<double> uniform_times(double t0, double t1, double dt_max) {
    if (!(t1 >= t0) || !(dt_max > 0.0)) throw ValidationError("uniform_times: need t1 >= t0 and dt_max > 0");
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil((t1 - t0) / dt_max - 1e-9)));
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(steps);
    t.back() = t1;
    return t;
}

// ---------------------------------------------------------------------------

double decay_fit(std::span<const double> times, std::span<const double> sup_norms) {
    if (times.size() != sup_norms.size() || times.size() < 2)
        throw ValidationError("decay_fit: need matching series with at least two samples");
    for (double v : sup_norms)
        if (!(v > 0.0)) throw ValidationError("decay_fit: sup norms must be positive");
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    if (!(*lo >= 0.0) || !(*hi >= 10.0 * *lo) || !(*hi > *lo))
        throw ValidationError("decay_fit: times must span at least one decade");
    const std::size_t n = times.size();
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += std::log1p(times[i]);
        sy += std::log(sup_norms[i]);
    }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log1p(times[i]) - mx;
        sxy += dx * (std::log(sup_norms[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

EnergyValues energies(const Snapshot& snapshot, const SpectralBoxField& field, double R) {
    const auto& ut = snapshot.field(FieldKind::Ut);
    const auto& lap = snapshot.field(FieldKind::LapU);
    const std::vector<double>* u = nullptr;
    for (std::size_t i = 0; i < snapshot.kinds.size(); ++i)
        if (snapshot.kinds[i] == FieldKind::U) u = &snapshot.fields[i];
    const std::size_t n = field.n();
    if (ut.size() != n * n * n) throw ValidationError("energies: snapshot does not match the box");
    const double h3 = std::pow(field.spacing(), 3);
    double e0 = 0.0, eu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = field.coordinate(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double y = field.coordinate(j);
            for (std::size_t l = 0; l < n; ++l) {
                const double z = field.coordinate(l);
                if (x * x + y * y + z * z >= R * R) continue;
                const std::size_t idx = field.index(i, j, l);
                e0 += ut[idx] * ut[idx] + lap[idx] * lap[idx];
                if (u) eu += (*u)[idx] * (*u)[idx];
            }
        }
    }
    EnergyValues out;
    out.E0 = 0.5 * h3 * e0;
    out.E = u ? out.E0 + 0.5 * h3 * eu : std::numeric_limits<double>::quiet_NaN();
    return out;
}

std::vector<FieldKind> flux_kinds() {
    return {FieldKind::Utt, FieldKind::Ut, FieldKind::Utx, FieldKind::Uty, FieldKind::Utz,
            FieldKind::LapUt, FieldKind::LapU, FieldKind::LapUx, FieldKind::LapUy, FieldKind::LapUz};
}

double boundary_flux_F2(const PointSeries& series, const SphereGrid& sphere, std::size_t i1, std::size_t i2) {
    if (series.n_points() != sphere.size()) throw ValidationError("boundary_flux_F2: series and sphere sizes differ");
    if (!(i1 <= i2 && i2 < series.times.size())) throw ValidationError("boundary_flux_F2: bad time index range");
    if (i1 == i2) return 0.0;
    const auto kinds = flux_kinds();
    std::vector<const std::vector<double>*> cols;
    for (auto k : kinds) cols.push_back(&series.series(k));
    const std::size_t P = sphere.size();
    double total = 0.0;
    for (std::size_t it = i1; it <= i2; ++it) {
        double g = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            double s = 0.0;
            for (const auto* c : cols) {
                const double v = (*c)[it * P + p];
                s += v * v;
            }
            g += sphere.weights()[p] * s;
        }
        double w;
        if (it == i1) w = 0.5 * (series.times[i1 + 1] - series.times[i1]);
        else if (it == i2) w = 0.5 * (series.times[i2] - series.times[i2 - 1]);
        else w = 0.5 * (series.times[it + 1] - series.times[it - 1]);
        total += w * g;
    }
    return total;
}

double boundary_flux_F2(const PointSeries& series, const SphereGrid& sphere) {
    if (series.times.empty()) return 0.0;
    return boundary_flux_F2(series, sphere, 0, series.times.size() - 1);
}

namespace {

void validate_flux_params(const SourceField& f, const FluxParams& params) {
    if (!(params.R > 0.0)) throw ValidationError("R must be positive");
    if (!(f.support_radius() <= params.R)) throw ValidationError("source support must lie inside B_R");
    if (!(params.box.L >= 2.0 * (params.R + f.support_radius())))
        throw ValidationError("box half-length must be at least 2 (R + R^)");
}

double sphere_flux(const SpectralBoxField& box, const SphereGrid& sphere, double t1, double t2, const FluxParams& params) {
    if (t2 <= t1) return 0.0;
    const auto times = uniform_times(t1, t2, params.dt_max);
    const auto kinds = flux_kinds();
    const auto series = evolve_at_points(box, sphere.points(), times, kinds, params.guard_ratio);
    return boundary_flux_F2(series, sphere);
}

}  // namespace

EnergyReport energy_report(const SourceField& f, double sigma, std::span<const double> times, const FluxParams& params) {
    validate_flux_params(f, params);
    if (times.empty()) throw ValidationError("energy_report: no times");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ValidationError("energy_report: times must increase");
    const auto box = make_box_field(f, params.box, sigma);
    EnergyReport rep;
    EvolveOptions opts{{FieldKind::U, FieldKind::Ut, FieldKind::LapU}, params.guard_ratio};
    evolve_each(box, times, opts, [&](const Snapshot& s) {
        const auto e = energies(s, box, params.R);
        rep.times.push_back(s.t);
        rep.E.push_back(e.E);
        rep.E0.push_back(e.E0);
    });
    const auto sphere = SphereGrid::make(params.R, params.n_sphere, params.sphere_rule);
    rep.F2 = sphere_flux(box, sphere, times.front(), times.back(), params);
    return rep;
}

bool observability_window_contains(double R, double T) {
    const double w = 2.0 * R + 1.0;
    return T > 4.0 * w && T < 5.0 * w;
}

ObservabilityReport observability_ratio(const SourceField& f, double sigma, double T, const FluxParams& params) {
    if (!observability_window_contains(params.R, T))
        throw ValidationError("observability_ratio: T must satisfy 4(2R + 1) < T < 5(2R + 1)");
    validate_flux_params(f, params);
    ObservabilityReport rep;
    rep.T = T;
    rep.f_norm_sq = f.l2_norm_sq();
    if (!(rep.f_norm_sq > 0.0)) {
        rep.degenerate = true;
        rep.ratio = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    const auto box = make_box_field(f, params.box, sigma);
    const auto sphere = SphereGrid::make(params.R, params.n_sphere, params.sphere_rule);
    rep.F2 = sphere_flux(box, sphere, 0.0, T, params);
    rep.ratio = rep.f_norm_sq / rep.F2;
    return rep;
}

EnergyInequalityResult energy_inequality_check(const SourceField& f, double sigma, double t1, double t2,
                                               const FluxParams& params) {
    if (!(t1 >= 0.0 && t2 >= t1)) throw ValidationError("energy_inequality_check: need 0 <= t1 <= t2");
    EnergyInequalityResult r;
    r.t1 = t1;
    r.t2 = t2;
    if (t1 == t2) {
        const double ts[1] = {t1};
        const auto rep = energy_report(f, sigma, ts, params);
        r.E0_t1 = r.E0_t2 = rep.E0.front();
        return r;
    }
    const double ts[2] = {t1, t2};
    const auto rep = energy_report(f, sigma, ts, params);
    r.E0_t1 = rep.E0[0];
    r.E0_t2 = rep.E0[1];
    r.F2 = rep.F2;
    r.margin = r.E0_t1 + r.F2 - r.E0_t2;
    return r;
}

// ---------------------------------------------------------------------------

std::vector<cplx> time_to_frequency(std::span<const double> times, std::span<const double> values, std::size_t n_points,
                                    std::span<const double> k) {
    const std::size_t nt = times.size();
    if (nt < 2) throw ValidationError("time_to_frequency: need at least two time samples");
    if (values.size() != nt * n_points) throw ValidationError("time_to_frequency: value count must be times x points");
    if (times.front() != 0.0) throw ValidationError("time_to_frequency: time grid must start at 0");
    const double dt = (times.back() - times.front()) / static_cast<double>(nt - 1);
    for (std::size_t i = 1; i < nt; ++i)
        if (std::abs(times[i] - times[i - 1] - dt) > 1e-9 * dt) throw ValidationError("time_to_frequency: time grid must be uniform");

    std::vector<cplx> out(k.size() * n_points);
    parallel_for(k.size(), [&](std::size_t q) {
        cplx* dst = &out[q * n_points];
        for (std::size_t i = 0; i < nt; ++i) {
            const double w = (i == 0 || i == nt - 1) ? 0.5 * dt : dt;
            const double ph = k[q] * times[i];
            const cplx e = w * cplx(std::cos(ph), std::sin(ph));
            for (std::size_t p = 0; p < n_points; ++p) dst[p] += values[i * n_points + p] * e;
        }
    });
    return out;
}

std::vector<cplx> time_to_frequency(const PointSeries& series, std::span<const double> k) {
    return time_to_frequency(series.times, series.series(FieldKind::U), series.n_points(), k);
}

}  // namespace biplate::timedomain
