#include "biplate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "biplate/forward.hpp"
#include "biplate/io.hpp"
#include "json.hpp"

namespace biplate::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON <-> config
// ---------------------------------------------------------------------------

json box_to_json(const timedomain::BoxParams& b) {
    return {{"L", b.L}, {"n", b.n}, {"xi_cut", b.xi_cut ? json(*b.xi_cut) : json(nullptr)}};
}

json source_to_json(const SourceSpec& spec) {
    json arr = json::array();
    for (const auto& b : spec) {
        if (const auto* g = std::get_if<GaussianBump>(&b))
            arr.push_back({{"type", "gaussian"}, {"center", g->center}, {"width", g->width}, {"amplitude", g->amplitude}});
        else {
            const auto& p = std::get<PolynomialBump>(b);
            arr.push_back({{"type", "polynomial"},
                           {"center", p.center},
                           {"radius", p.radius},
                           {"exponent", p.exponent},
                           {"amplitude", p.amplitude}});
        }
    }
    return arr;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["R"] = c.R;
    j["R_hat"] = c.R_hat;
    j["delta"] = c.delta;
    j["d"] = c.d;
    j["sigma"] = c.sigmas;
    j["K"] = c.Ks;
    j["nk"] = c.nk;
    j["spacing"] = c.spacing == FrequencySpacing::Sqrt ? "sqrt" : "linear";
    j["n_sphere"] = c.n_sphere;
    j["sphere_rule"] = c.sphere_rule == SphereRule::GaussProduct ? "gauss" : "fibonacci";
    j["n_vol"] = c.n_vol;
    j["n_dir"] = c.n_dir;
    j["noise"] = c.noise_levels;
    j["seeds"] = c.seeds;
    j["source"] = source_to_json(c.source);
    j["Q"] = c.Q ? json(*c.Q) : json(nullptr);
    j["smoothness"] = c.smoothness ? json(*c.smoothness) : json(nullptr);
    j["box"] = box_to_json(c.box);
    j["times"] = c.times;
    j["fit_window"] = c.fit_window;
    j["guard_ratio"] = c.guard_ratio;
    j["T"] = c.T;
    json pairs = json::array();
    for (const auto& [a, b] : c.energy_pairs) pairs.push_back({a, b});
    j["energy_pairs"] = pairs;
    j["flux"] = {{"n_sphere", c.flux.n_sphere},
                 {"dt", c.flux.dt},
                 {"guard_ratio", c.flux.guard_ratio},
                 {"box", box_to_json(c.flux.box)},
                 {"refined_box", c.flux.refined_box ? box_to_json(*c.flux.refined_box) : json(nullptr)}};
    j["trend_slack"] = c.trend_slack;
    j["out"] = c.out;
    return j;
}

template <class T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const std::exception& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
    }
}

template <class T>
std::optional<T> get_opt(const json& j, const std::string& key) {
    if (j.is_null()) return std::nullopt;
    return get_as<T>(j, key);
}

timedomain::BoxParams box_from_json(const json& j, const std::string& key) {
    timedomain::BoxParams b;
    b.L = get_as<double>(j.at("L"), key + ".L");
    b.n = get_as<std::size_t>(j.at("n"), key + ".n");
    b.xi_cut = get_opt<double>(j.at("xi_cut"), key + ".xi_cut");
    return b;
}

Vec3 vec3_from_json(const json& j, const std::string& key) {
    const auto v = get_as<std::vector<double>>(j, key);
    if (v.size() != 3) throw ValidationError("config key '" + key + "': expected 3 coordinates");
    return {v[0], v[1], v[2]};
}

SourceSpec source_from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("config key 'source': expected a list of bumps");
    SourceSpec spec;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& b = j[i];
        const std::string key = "source[" + std::to_string(i) + "]";
        if (!b.is_object()) throw ValidationError("config key '" + key + "': expected an object");
        const auto type = b.value("type", std::string());
        auto num = [&](const char* name, double dflt) {
            return b.contains(name) ? get_as<double>(b.at(name), key + "." + name) : dflt;
        };
        const Vec3 center = b.contains("center") ? vec3_from_json(b.at("center"), key + ".center") : Vec3{0, 0, 0};
        static const std::set<std::string> gaussian_keys{"type", "center", "width", "amplitude"};
        static const std::set<std::string> poly_keys{"type", "center", "radius", "exponent", "amplitude"};
        const auto& allowed = type == "gaussian" ? gaussian_keys : poly_keys;
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!allowed.count(it.key())) throw ValidationError("config key '" + key + "." + it.key() + "' is unknown");
        if (type == "gaussian") {
            spec.push_back(GaussianBump{center, num("width", 0.12), num("amplitude", 1.0)});
        } else if (type == "polynomial") {
            const int m = b.contains("exponent") ? get_as<int>(b.at("exponent"), key + ".exponent") : 4;
            spec.push_back(PolynomialBump{center, num("radius", 0.5), m, num("amplitude", 1.0)});
        } else {
            throw ValidationError("config key '" + key + ".type': expected \"gaussian\" or \"polynomial\"");
        }
    }
    return spec;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.R = get_as<double>(j.at("R"), "R");
    c.R_hat = get_as<double>(j.at("R_hat"), "R_hat");
    c.delta = get_as<double>(j.at("delta"), "delta");
    c.d = get_as<double>(j.at("d"), "d");
    c.sigmas = get_as<std::vector<double>>(j.at("sigma"), "sigma");
    c.Ks = get_as<std::vector<double>>(j.at("K"), "K");
    c.nk = get_as<std::size_t>(j.at("nk"), "nk");
    const auto spacing = get_as<std::string>(j.at("spacing"), "spacing");
    if (spacing == "sqrt") c.spacing = FrequencySpacing::Sqrt;
    else if (spacing == "linear") c.spacing = FrequencySpacing::Linear;
    else throw ValidationError("config key 'spacing': expected \"sqrt\" or \"linear\"");
    c.n_sphere = get_as<std::size_t>(j.at("n_sphere"), "n_sphere");
    const auto rule = get_as<std::string>(j.at("sphere_rule"), "sphere_rule");
    if (rule == "gauss") c.sphere_rule = SphereRule::GaussProduct;
    else if (rule == "fibonacci") c.sphere_rule = SphereRule::Fibonacci;
    else throw ValidationError("config key 'sphere_rule': expected \"gauss\" or \"fibonacci\"");
    c.n_vol = get_as<std::size_t>(j.at("n_vol"), "n_vol");
    c.n_dir = get_as<std::size_t>(j.at("n_dir"), "n_dir");
    c.noise_levels = get_as<std::vector<double>>(j.at("noise"), "noise");
    c.seeds = get_as<std::vector<std::uint64_t>>(j.at("seeds"), "seeds");
    c.source = source_from_json(j.at("source"));
    c.Q = get_opt<double>(j.at("Q"), "Q");
    c.smoothness = get_opt<int>(j.at("smoothness"), "smoothness");
    c.box = box_from_json(j.at("box"), "box");
    c.times = get_as<std::vector<double>>(j.at("times"), "times");
    const auto fw = get_as<std::vector<double>>(j.at("fit_window"), "fit_window");
    if (fw.size() != 2) throw ValidationError("config key 'fit_window': expected [t_min, t_max]");
    c.fit_window = {fw[0], fw[1]};
    c.guard_ratio = get_as<double>(j.at("guard_ratio"), "guard_ratio");
    c.T = get_as<std::vector<double>>(j.at("T"), "T");
    for (const auto& p : j.at("energy_pairs")) {
        const auto v = get_as<std::vector<double>>(p, "energy_pairs");
        if (v.size() != 2) throw ValidationError("config key 'energy_pairs': expected [t1, t2] pairs");
        c.energy_pairs.emplace_back(v[0], v[1]);
    }
    const auto& fl = j.at("flux");
    c.flux.n_sphere = get_as<std::size_t>(fl.at("n_sphere"), "flux.n_sphere");
    c.flux.dt = get_as<double>(fl.at("dt"), "flux.dt");
    c.flux.guard_ratio = get_as<double>(fl.at("guard_ratio"), "flux.guard_ratio");
    c.flux.box = box_from_json(fl.at("box"), "flux.box");
    if (!fl.at("refined_box").is_null()) c.flux.refined_box = box_from_json(fl.at("refined_box"), "flux.refined_box");
    c.trend_slack = get_as<double>(j.at("trend_slack"), "trend_slack");
    c.out = get_as<std::string>(j.at("out"), "out");
    return c;
}

/// Recursive overlay; objects in the defaults are merged key by key.
void overlay(json& base, const json& user, const std::string& prefix) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ValidationError("config key '" + key + "' is unknown");
        json& slot = base[it.key()];
        if (slot.is_object() && it.value().is_object()) {
            overlay(slot, it.value(), key);
        } else if (it.key() == "refined_box" && it.value().is_object()) {
            json b = box_to_json(timedomain::BoxParams{});
            overlay(b, it.value(), key);
            slot = b;
        } else {
            slot = it.value();
        }
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
}

void validate_box(const timedomain::BoxParams& b, const std::string& key) {
    require(b.L > 0.0, key + ".L must be positive");
    require(b.n >= 4 && b.n % 2 == 0, key + ".n must be even and at least 4");
    require(!b.xi_cut || *b.xi_cut > 0.0, key + ".xi_cut must be positive");
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

void write_csv(const fs::path& path, const io::CsvTable& table, bool force) {
    if (!force && fs::exists(path)) throw ValidationError(path.string() + " exists; pass --force to overwrite");
    io::atomic_write(path, table.render(io::utc_timestamp()));
}

void echo_config(const fs::path& out, const std::string& command, const ExperimentConfig& c) {
    io::atomic_write(out / "results" / (command + "_config.json"), c.to_json());
}

std::string fmt_u(std::uint64_t v) { return std::to_string(v); }

std::string csv_text(std::string s) {
    for (auto& ch : s)
        if (ch == '"' || ch == '\n') ch = '\'';
    return "\"" + s + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    require(R > 0.0, "R must be positive");
    require(R_hat > 0.0 && R_hat < R, "R_hat must satisfy 0 < R_hat < R");
    require(delta > 0.0, "delta must be positive");
    require(d > 0.0, "d must be positive");
    require(!sigmas.empty(), "sigma list is empty");
    for (double s : sigmas) require(s >= 0.0 && std::isfinite(s), "sigma values must be finite and nonnegative");
    require(!Ks.empty(), "K list is empty");
    for (double k : Ks) require(k > delta && std::isfinite(k), "K values must exceed delta");
    require(nk >= 2, "nk must be at least 2");
    require(n_sphere > 0 && n_vol > 0 && n_dir > 0, "counts must be positive");
    require(!noise_levels.empty(), "noise list is empty");
    for (double v : noise_levels) require(v >= 0.0 && std::isfinite(v), "noise levels must be nonnegative");
    require(!seeds.empty(), "seed list is empty");
    if (Q) require(*Q > 0.0, "Q must be positive");
    validate_box(box, "box");
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(times[i] >= 0.0 && std::isfinite(times[i]), "times must be finite and nonnegative");
        if (i) require(times[i] > times[i - 1], "times must increase");
    }
    require(fit_window[0] >= 0.0 && fit_window[1] > fit_window[0], "fit_window must be [t_min, t_max] with t_min < t_max");
    require(guard_ratio >= 0.0, "guard_ratio must be nonnegative");
    for (double t : T)
        require(timedomain::observability_window_contains(R, t),
                "T = " + io::fmt_double(t) + " lies outside the window 4(2R + 1) < T < 5(2R + 1)");
    for (const auto& [a, b] : energy_pairs) require(a >= 0.0 && b > a, "energy_pairs need 0 <= t1 < t2");
    require(flux.n_sphere > 0, "flux.n_sphere must be positive");
    require(flux.dt > 0.0, "flux.dt must be positive");
    require(flux.guard_ratio >= 0.0, "flux.guard_ratio must be nonnegative");
    validate_box(flux.box, "flux.box");
    if (flux.refined_box) validate_box(*flux.refined_box, "flux.refined_box");
    require(trend_slack >= 0.0 && trend_slack < 1.0, "trend_slack must lie in [0, 1)");
}

std::string ExperimentConfig::to_json() const { return config_to_json(*this).dump(2) + "\n"; }

// The output directory is where results go, not part of the experiment.
std::string ExperimentConfig::hash() const {
    auto j = config_to_json(*this);
    j.erase("out");
    return io::fnv1a_hex(j.dump());
}

SourceField ExperimentConfig::make_source() const { return make_source_field(source, n_vol, R_hat); }

inverse::SweepConfig ExperimentConfig::sweep_config() const {
    inverse::SweepConfig s;
    s.R = R;
    s.R_hat = R_hat;
    s.delta = delta;
    s.sigmas = sigmas;
    s.Ks = Ks;
    s.nk = nk;
    s.spacing = spacing;
    s.n_sphere = n_sphere;
    s.sphere_rule = sphere_rule;
    s.n_vol = n_vol;
    s.n_dir = n_dir;
    s.noise_levels = noise_levels;
    s.seeds = seeds;
    s.source = source;
    s.Q = Q;
    s.smoothness = smoothness;
    return s;
}

timedomain::FluxParams ExperimentConfig::flux_params(bool refined) const {
    timedomain::FluxParams p;
    p.R = R;
    p.box = refined && flux.refined_box ? *flux.refined_box : flux.box;
    p.n_sphere = flux.n_sphere;
    p.sphere_rule = SphereRule::GaussProduct;
    p.dt_max = flux.dt;
    p.guard_ratio = flux.guard_ratio;
    return p;
}

std::string default_config_json() { return ExperimentConfig{}.to_json(); }

ExperimentConfig parse_config(std::string_view json_text) {
    json user;
    try {
        user = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (!user.is_object()) throw ValidationError("config: top level must be an object");
    json merged = config_to_json(ExperimentConfig{});
    overlay(merged, user, "");
    auto c = config_from_json(merged);
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(io::read_file(path)); }

ExperimentConfig apply_options(ExperimentConfig config, const RunOptions& options) {
    if (options.seed) config.seeds = {*options.seed};
    if (!options.out.empty()) config.out = options.out.string();
    return config;
}

fs::path output_dir(const ExperimentConfig& config, const RunOptions& options) {
    return options.out.empty() ? fs::path(config.out) : options.out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

SynthResult run_synth(const ExperimentConfig& config_in, const RunOptions& options) {
    const auto config = apply_options(config_in, options);
    config.validate();
    const fs::path out = output_dir(config, options);
    if (!options.force && fs::exists(out / "manifest.json"))
        throw ValidationError((out / "manifest.json").string() + " exists; pass --force to overwrite");

    const double sigma = config.sigmas.front(), K = config.Ks.front(), noise = config.noise_levels.front();
    const std::uint64_t seed = config.seeds.front();
    const auto f = config.make_source();
    const auto sphere = SphereGrid::make(config.R, config.n_sphere, config.sphere_rule);
    const auto freqs = FrequencyGrid::make(config.delta, K, config.nk, config.spacing);
    auto ds = forward::synthesize_dataset(f, sphere, freqs, sigma, Provenance{io::source_hash(f), seed, 0.0});
    if (noise > 0.0) ds = inverse::add_noise(ds, noise, seed);

    auto manifest = io::dataset_manifest(ds, config.R_hat, config.n_vol, f.smoothness(), config.delta, K, config.spacing);
    manifest.provenance.config_hash = config.hash();
    io::write_dataset(out, ds, f, manifest, options.force);

    SynthResult res{out, inverse::epsilon_data(ds)};
    io::CsvTable t({{"sigma", "1"}, {"K", "1"}, {"nk", "1"}, {"n_sphere", "1"}, {"noise", "1"}, {"seed", "1"},
                    {"epsilon", "1"}});
    t.add_meta("config_hash", manifest.provenance.config_hash);
    t.add_row({io::fmt_double(sigma), io::fmt_double(K), fmt_u(config.nk), fmt_u(sphere.size()), io::fmt_double(noise),
               fmt_u(seed), io::fmt_double(res.epsilon)});
    write_csv(out / "results" / "synth.csv", t, options.force);
    echo_config(out, "synth", config);
    return res;
}

// ---------------------------------------------------------------------------
// recon
// ---------------------------------------------------------------------------

ReconResult run_recon(const ExperimentConfig& config_in, const fs::path& dataset_dir, const RunOptions& options) {
    const auto config = apply_options(config_in, options);
    config.validate();
    const fs::path out = output_dir(config, options);
    const fs::path src = dataset_dir.empty() ? out : dataset_dir;

    const auto files = io::read_dataset(src);
    const auto& m = files.manifest;
    const auto dirs = fibonacci_directions(config.n_dir);
    const auto samples = inverse::sample_fourier(files.dataset, dirs);
    const SourceField target = files.truth ? *files.truth : SourceField::zeros(m.geometry.R_hat, m.geometry.n_vol);
    const auto rec = inverse::reconstruct(samples, target);

    ReconResult res;
    res.imag_residue = rec.max_imag_residue;
    res.max_abs_real = rec.max_abs_real;
    if (!files.truth) res.status = "no_truth";
    else if (!(files.truth->l2_norm_sq() > 0.0)) res.status = "zero_truth";
    else {
        res.rel_error = inverse::relative_l2_error(rec.field, *files.truth);
        res.status = "ok";
    }

    auto rec_manifest = m;
    rec_manifest.provenance.config_hash = config.hash();
    io::write_field(out / "recon", rec.field, rec_manifest, options.force);

    io::CsvTable t({{"sigma", "1"}, {"K", "1"}, {"noise", "1"}, {"seed", "1"}, {"n_dir", "1"}, {"rel_error", "1"},
                    {"imag_residue", "1"}, {"max_abs_real", "1"}, {"status", "-"}});
    t.add_meta("dataset", fs::absolute(src).lexically_normal().string());
    t.add_meta("config_hash", rec_manifest.provenance.config_hash);
    t.add_row({io::fmt_double(m.geometry.sigma), io::fmt_double(m.geometry.K), io::fmt_double(m.provenance.noise_level),
               fmt_u(m.provenance.seed), fmt_u(config.n_dir),
               res.rel_error ? io::fmt_double(*res.rel_error) : std::string("nan"), io::fmt_double(res.imag_residue),
               io::fmt_double(res.max_abs_real), res.status});
    write_csv(out / "results" / "recon.csv", t, options.force);
    echo_config(out, "recon", config);
    return res;
}

// ---------------------------------------------------------------------------
// timesim
// ---------------------------------------------------------------------------

TimesimResult run_timesim(const ExperimentConfig& config_in, const RunOptions& options) {
    using namespace timedomain;
    const auto config = apply_options(config_in, options);
    config.validate();
    if (config.times.empty() && config.energy_pairs.empty() && config.T.empty())
        throw ValidationError("config: timesim needs times, energy_pairs or T");
    const fs::path out = output_dir(config, options);
    const auto f = config.make_source();
    const std::string hash = config.hash();
    TimesimResult res;

    if (!config.times.empty()) {
        io::CsvTable series({{"sigma", "1"}, {"t", "1"}, {"sup_U", "1"}, {"sup_grad_U", "1"}, {"guard_ratio", "1"}});
        io::CsvTable fits({{"sigma", "1"}, {"quantity", "-"}, {"slope", "1"}, {"expected", "1"}, {"t_min", "1"},
                           {"t_max", "1"}, {"n_points", "1"}, {"status", "-"}});
        series.add_meta("config_hash", hash);
        fits.add_meta("config_hash", hash);
        fits.add_meta("fit", "least-squares slope of log(sup) against log(1 + t)");
        for (double sigma : config.sigmas) {
            const auto box = make_box_field(f, config.box, sigma);
            std::vector<double> ts, su, sg;
            EvolveOptions opts{{FieldKind::U, FieldKind::Ux, FieldKind::Uy, FieldKind::Uz}, config.guard_ratio};
            evolve_each(box, config.times, opts, [&](const Snapshot& s) {
                const auto& u = s.field(FieldKind::U);
                const auto& gx = s.field(FieldKind::Ux);
                const auto& gy = s.field(FieldKind::Uy);
                const auto& gz = s.field(FieldKind::Uz);
                double a = 0.0, b = 0.0;
                for (std::size_t i = 0; i < u.size(); ++i) {
                    a = std::max(a, std::abs(u[i]));
                    b = std::max(b, std::sqrt(gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]));
                }
                series.add_row({io::fmt_double(sigma), io::fmt_double(s.t), io::fmt_double(a), io::fmt_double(b),
                                io::fmt_double(s.guard_ratio)});
                if (s.t >= config.fit_window[0] && s.t <= config.fit_window[1]) {
                    ts.push_back(s.t);
                    su.push_back(a);
                    sg.push_back(b);
                }
            });
            const std::pair<const char*, const std::vector<double>*> quantities[2] = {{"sup_U", &su}, {"sup_grad_U", &sg}};
            const double expected[2] = {-0.75, -1.0};
            for (int q = 0; q < 2; ++q) {
                DecayFitRow row{sigma, quantities[q].first, std::nullopt, "ok"};
                const auto& ys = *quantities[q].second;
                if (ts.size() < 2) row.status = "skipped_too_few_times";
                else if (std::any_of(ys.begin(), ys.end(), [](double v) { return !(v > 0.0); }))
                    row.status = "skipped_zero_series";
                else if (ts.back() < 10.0 * ts.front()) row.status = "skipped_short_window";
                else row.slope = decay_fit(ts, ys);
                fits.add_row({io::fmt_double(sigma), row.quantity, row.slope ? io::fmt_double(*row.slope) : "nan",
                              io::fmt_double(expected[q]), ts.empty() ? "nan" : io::fmt_double(ts.front()),
                              ts.empty() ? "nan" : io::fmt_double(ts.back()), fmt_u(ts.size()), row.status});
                res.fits.push_back(row);
            }
        }
        write_csv(out / "results" / "decay_series.csv", series, options.force);
        write_csv(out / "results" / "decay_fit.csv", fits, options.force);
    }

    if (!config.energy_pairs.empty()) {
        io::CsvTable t({{"sigma", "1"}, {"t1", "1"}, {"t2", "1"}, {"E0_t1", "1"}, {"E0_t2", "1"}, {"F2", "1"},
                        {"margin", "1"}, {"margin_over_E0_t1", "1"}});
        t.add_meta("config_hash", hash);
        t.add_meta("margin", "E0(t1) + F2(t1, t2) - E0(t2)");
        const auto params = config.flux_params();
        for (double sigma : config.sigmas)
            for (const auto& [t1, t2] : config.energy_pairs) {
                const auto r = energy_inequality_check(f, sigma, t1, t2, params);
                const double rel = r.E0_t1 > 0.0 ? r.margin / r.E0_t1 : std::numeric_limits<double>::quiet_NaN();
                t.add_row({io::fmt_double(sigma), io::fmt_double(t1), io::fmt_double(t2), io::fmt_double(r.E0_t1),
                           io::fmt_double(r.E0_t2), io::fmt_double(r.F2), io::fmt_double(r.margin), io::fmt_double(rel)});
                res.energy.push_back(r);
                res.energy_sigmas.push_back(sigma);
            }
        write_csv(out / "results" / "energy.csv", t, options.force);
    }

    if (!config.T.empty()) {
        io::CsvTable t({{"sigma", "1"}, {"T", "1"}, {"R", "1"}, {"f_norm_sq", "1"}, {"F2", "1"}, {"ratio", "1"},
                        {"ratio_refined", "1"}, {"rel_change", "1"}, {"status", "-"}});
        t.add_meta("config_hash", hash);
        t.add_meta("ratio", "||f||^2 over B_R divided by F2(0, T)");
        for (double sigma : config.sigmas)
            for (double T : config.T) {
                const auto r = observability_ratio(f, sigma, T, config.flux_params());
                std::optional<double> refined;
                if (config.flux.refined_box && !r.degenerate)
                    refined = observability_ratio(f, sigma, T, config.flux_params(true)).ratio;
                const double change = refined ? std::abs(*refined - r.ratio) / std::abs(r.ratio)
                                              : std::numeric_limits<double>::quiet_NaN();
                t.add_row({io::fmt_double(sigma), io::fmt_double(T), io::fmt_double(config.R),
                           io::fmt_double(r.f_norm_sq), io::fmt_double(r.F2), io::fmt_double(r.ratio),
                           refined ? io::fmt_double(*refined) : "nan", io::fmt_double(change),
                           r.degenerate ? "degenerate" : "ok"});
                res.observability.push_back(r);
                res.observability_refined.push_back(refined);
                res.observability_sigmas.push_back(sigma);
            }
        write_csv(out / "results" / "observability.csv", t, options.force);
    }
    echo_config(out, "timesim", config);
    return res;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

std::vector<TrendVerdict> trend_verdicts(const std::vector<inverse::StabilityRecord>& records,
                                         const std::vector<SweepFailure>& failures, double slack) {
    using Key = std::tuple<double, double, std::uint64_t>;  // fixed coordinate, noise, seed
    std::map<Key, std::map<double, double>> by_sigma, by_K;  // -> (varying coordinate -> error)
    std::set<Key> broken_sigma, broken_K;
    for (const auto& r : records) {
        by_sigma[{r.sigma, r.noise, r.seed}][r.K] = r.rel_error;
        by_K[{r.K, r.noise, r.seed}][r.sigma] = r.rel_error;
    }
    for (const auto& f : failures) {
        broken_sigma.insert({f.sigma, f.noise, f.seed});
        broken_K.insert({f.K, f.noise, f.seed});
        by_sigma[{f.sigma, f.noise, f.seed}];
        by_K[{f.K, f.noise, f.seed}];
    }
    std::vector<TrendVerdict> out;
    auto judge = [&](const std::string& check, const Key& key, const std::map<double, double>& series, bool broken,
                     bool nonincreasing) {
        TrendVerdict v;
        v.check = check;
        v.fixed = std::get<0>(key);
        v.noise = std::get<1>(key);
        v.seed = std::get<2>(key);
        for (const auto& [x, e] : series) v.errors.push_back(e);
        if (broken) v.verdict = "incomplete";
        else if (v.errors.size() < 2) v.verdict = "n/a";
        else {
            bool ok = true;
            for (std::size_t i = 1; i < v.errors.size(); ++i) {
                const double prev = v.errors[i - 1], cur = v.errors[i];
                ok = ok && (nonincreasing ? cur <= prev * (1.0 + slack) : cur >= prev * (1.0 - slack));
            }
            v.verdict = ok ? "pass" : "fail";
        }
        out.push_back(std::move(v));
    };
    for (const auto& [key, series] : by_sigma) judge("monotone_in_K", key, series, broken_sigma.count(key) > 0, true);
    for (const auto& [key, series] : by_K) judge("monotone_in_sigma", key, series, broken_K.count(key) > 0, false);
    return out;
}

SweepOutcome run_sweep(const ExperimentConfig& config_in, const RunOptions& options) {
    const auto config = apply_options(config_in, options);
    config.validate();
    const fs::path out = output_dir(config, options);
    SweepOutcome res;
    res.config_hash = config.hash();

    const auto sc = config.sweep_config();
    inverse::SweepContext ctx(sc);
    io::CsvTable rows({{"sigma", "1"}, {"K", "1"}, {"noise", "1"}, {"seed", "1"}, {"epsilon", "1"}, {"rel_error", "1"},
                       {"Q", "1"}, {"n", "1"}, {"imag_residue", "1"}, {"status", "-"}});
    rows.add_meta("config_hash", res.config_hash);
    for (double sigma : sc.sigmas)
        for (double K : sc.Ks)
            for (double noise : sc.noise_levels)
                for (auto seed : sc.seeds) {
                    try {
                        const auto r = ctx.run_cell(sigma, K, noise, seed);
                        rows.add_row({io::fmt_double(r.sigma), io::fmt_double(r.K), io::fmt_double(r.noise), fmt_u(r.seed),
                                      io::fmt_double(r.epsilon), io::fmt_double(r.rel_error), io::fmt_double(r.Q),
                                      std::to_string(r.n), io::fmt_double(r.imag_residue), "ok"});
                        res.records.push_back(r);
                    } catch (const inverse::SweepCellError& e) {
                        rows.add_row({io::fmt_double(sigma), io::fmt_double(K), io::fmt_double(noise), fmt_u(seed), "nan",
                                      "nan", "nan", "nan", "nan", csv_text(std::string("error: ") + e.what())});
                        res.failures.push_back({sigma, K, noise, seed, e.what()});
                    }
                }
    res.verdicts = trend_verdicts(res.records, res.failures, config.trend_slack);

    io::CsvTable summary({{"check", "-"}, {"fixed", "1"}, {"noise", "1"}, {"seed", "1"}, {"rel_errors", "1"},
                          {"verdict", "-"}});
    summary.add_meta("config_hash", res.config_hash);
    summary.add_meta("slack", io::fmt_double(config.trend_slack));
    summary.add_meta("cells", std::to_string(res.records.size()) + " ok, " + std::to_string(res.failures.size()) + " failed");
    for (const auto& v : res.verdicts) {
        std::string errs;
        for (std::size_t i = 0; i < v.errors.size(); ++i) errs += (i ? ";" : "") + io::fmt_double(v.errors[i]);
        summary.add_row({v.check, io::fmt_double(v.fixed), io::fmt_double(v.noise), fmt_u(v.seed), errs, v.verdict});
    }
    write_csv(out / "results" / "sweep.csv", rows, options.force);
    write_csv(out / "results" / "sweep_summary.csv", summary, options.force);
    echo_config(out, "sweep", config);
    return res;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

oracles::VerifyReport run_verify(const RunOptions& options) {
    const fs::path out = options.out.empty() ? fs::path("out") : options.out;
    for (const char* name : {"verify.csv", "verify.json"})
        if (!options.force && fs::exists(out / "results" / name))
            throw ValidationError((out / "results" / name).string() + " exists; pass --force to overwrite");
    auto rep = oracles::run_all_oracles();
    io::CsvTable t({{"oracle", "-"}, {"measured", "1"}, {"relation", "-"}, {"bound", "1"}, {"pass", "-"}, {"detail", "-"}});
    for (const auto& r : rep.results)
        t.add_row({r.name, io::fmt_double(r.measured), r.relation, io::fmt_double(r.bound), r.pass ? "true" : "false",
                   csv_text(r.detail)});
    write_csv(out / "results" / "verify.csv", t, options.force);
    io::atomic_write(out / "results" / "verify.json", oracles::verify_report_json(rep));
    return rep;
}

}  // namespace biplate::harness
