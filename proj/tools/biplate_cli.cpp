// biplate: synth | recon | timesim | sweep | verify
//
// Exit codes: 0 ok, 1 validation error, 2 oracle failure, 3 numerical guard abort.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "biplate/harness.hpp"
#include "biplate/io.hpp"
#include "biplate/parallel.hpp"

namespace {

using namespace biplate;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitOracle = 2;
constexpr int kExitGuard = 3;

struct Common {
    std::string config;
    std::string out;
    bool force = false;
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
    auto* cfg = sub->add_option("--config", c.config, "JSON experiment config");
    if (needs_config) cfg->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory (overrides the config)");
    sub->add_flag("--force", c.force, "overwrite existing outputs");
    sub->add_option("--threads", c.threads, "worker threads (default: hardware concurrency)");
    c.seed_opt = sub->add_option("--seed", c.seed, "replace the config's seed list with one seed");
}

harness::ExperimentConfig config_of(const Common& c) {
    return c.config.empty() ? harness::ExperimentConfig{} : harness::load_config(c.config);
}

harness::RunOptions options_of(const Common& c) {
    harness::RunOptions o;
    o.out = c.out;
    o.force = c.force;
    if (c.seed_opt && c.seed_opt->count() > 0) o.seed = c.seed;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Damped plate inverse source laboratory"};
    app.require_subcommand(1);
    bool print_defaults = false;
    app.add_flag("--print-default-config", print_defaults, "print the embedded default config and exit");

    Common c;
    std::string dataset;
    auto* synth = app.add_subcommand("synth", "synthesize a multi-frequency Cauchy dataset");
    add_common(synth, c, false);
    auto* recon = app.add_subcommand("recon", "reconstruct the source from a dataset");
    add_common(recon, c, false);
    recon->add_option("--dataset", dataset, "dataset directory (default: --out)");
    auto* timesim = app.add_subcommand("timesim", "time-domain decay, energy and observability runs");
    add_common(timesim, c, false);
    auto* sweep = app.add_subcommand("sweep", "stability sweep over sigma, K, noise and seed");
    add_common(sweep, c, false);
    auto* verify = app.add_subcommand("verify", "run the oracle suite");
    add_common(verify, c, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (print_defaults) {
            std::cout << harness::default_config_json();
            return kExitOk;
        }
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (c.threads > 0) set_thread_count(c.threads);
        const auto opts = options_of(c);
        if (synth->parsed()) {
            const auto r = harness::run_synth(config_of(c), opts);
            std::cout << "dataset written to " << r.dir.string() << " (epsilon " << io::fmt_double(r.epsilon) << ")\n";
        } else if (recon->parsed()) {
            const auto r = harness::run_recon(config_of(c), dataset, opts);
            std::cout << "reconstruction: status " << r.status << ", rel_error "
                      << (r.rel_error ? io::fmt_double(*r.rel_error) : "nan") << ", imag_residue "
                      << io::fmt_double(r.imag_residue) << "\n";
        } else if (timesim->parsed()) {
            const auto r = harness::run_timesim(config_of(c), opts);
            for (const auto& f : r.fits)
                std::cout << "decay sigma=" << f.sigma << " " << f.quantity << ": "
                          << (f.slope ? io::fmt_double(*f.slope) : f.status) << "\n";
            for (std::size_t i = 0; i < r.energy.size(); ++i)
                std::cout << "energy sigma=" << r.energy_sigmas[i] << " (" << r.energy[i].t1 << ", " << r.energy[i].t2
                          << "): margin " << io::fmt_double(r.energy[i].margin) << "\n";
            for (std::size_t i = 0; i < r.observability.size(); ++i)
                std::cout << "observability sigma=" << r.observability_sigmas[i] << " T=" << r.observability[i].T
                          << ": ratio " << io::fmt_double(r.observability[i].ratio) << "\n";
        } else if (sweep->parsed()) {
            const auto r = harness::run_sweep(config_of(c), opts);
            std::cout << r.records.size() << " cells ok, " << r.failures.size() << " failed; config hash "
                      << r.config_hash << "\n";
            for (const auto& v : r.verdicts)
                std::cout << v.check << " at " << v.fixed << " (noise " << v.noise << ", seed " << v.seed
                          << "): " << v.verdict << "\n";
        } else if (verify->parsed()) {
            const auto rep = harness::run_verify(opts);
            std::cout << oracles::verify_report_json(rep);
            return rep.pass() ? kExitOk : kExitOracle;
        }
    } catch (const timedomain::WrapAroundError& e) {
        std::cerr << "guard abort: " << e.what() << "\n";
        return kExitGuard;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
