#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "biplate/harness.hpp"
#include "biplate/io.hpp"

using namespace biplate;
using namespace biplate::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("biplate_harness_" + name);
    fs::remove_all(p);
    return p;
}

// Small inverse problem that runs in well under a second per cell.
ExperimentConfig tiny_config() {
    return parse_config(R"({
        "R": 1.0, "R_hat": 0.7, "delta": 0.5, "K": [4.0], "nk": 6, "n_sphere": 128, "n_vol": 10, "n_dir": 16,
        "source": [{"type": "gaussian", "center": [0.1, 0.0, 0.0], "width": 0.1, "amplitude": 1.0}]
    })");
}

RunOptions opts(const fs::path& out, bool force = false) {
    RunOptions o;
    o.out = out;
    o.force = force;
    return o;
}

}  // namespace

// --- config -------------------------------------------------------------------

TEST(Config, DefaultsRoundTripThroughJson) {
    const auto c = parse_config(default_config_json());
    EXPECT_EQ(c.to_json(), ExperimentConfig{}.to_json());
    EXPECT_EQ(c.hash(), ExperimentConfig{}.hash());
    EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, OverlayAndNestedKeys) {
    const auto c = parse_config(R"({"sigma": [0.5, 1.0], "flux": {"dt": 0.02, "refined_box": {"L": 16, "n": 128}},
                                    "source": [{"type": "polynomial", "center": [0, 0, 0], "radius": 0.5,
                                                "exponent": 4, "amplitude": 2.0}]})");
    EXPECT_EQ(c.sigmas, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(c.flux.dt, 0.02);
    EXPECT_EQ(c.flux.box.L, ExperimentConfig{}.flux.box.L);
    ASSERT_TRUE(c.flux.refined_box.has_value());
    EXPECT_EQ(c.flux.refined_box->n, 128u);
    const auto& b = std::get<PolynomialBump>(c.source.at(0));
    EXPECT_EQ(b.exponent, 4);
    EXPECT_EQ(b.amplitude, 2.0);
    EXPECT_NE(c.hash(), ExperimentConfig{}.hash());
}

TEST(Config, RejectsInvalidInput) {
    EXPECT_THROW(parse_config("{"), ValidationError);
    EXPECT_THROW(parse_config("[]"), ValidationError);
    EXPECT_THROW(parse_config(R"({"bogus": 1})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"flux": {"bogus": 1}})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"R_hat": 4.0})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"delta": 0})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"nk": 0})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"spacing": "log"})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"sigma": "x"})"), ValidationError);
    EXPECT_THROW(parse_config(R"({"source": [{"type": "square"}]})"), ValidationError);
}

TEST(Config, ObservabilityTimesMustLieInTheWindow) {
    const std::string base = R"({"R": 1.0, "R_hat": 0.7, "source": [{"type": "polynomial", "center": [0,0,0],
        "radius": 0.7, "exponent": 8, "amplitude": 1.0}], "T": [)";
    EXPECT_NO_THROW(parse_config(base + "12.5, 14.9]}"));
    EXPECT_THROW(parse_config(base + "12.0]}"), ValidationError);
    EXPECT_THROW(parse_config(base + "15.0]}"), ValidationError);
    EXPECT_THROW(parse_config(base + "16.0]}"), ValidationError);
}

TEST(Config, SeedAndOutOverrides) {
    RunOptions o;
    o.seed = 77;
    o.out = "elsewhere";
    const auto c = apply_options(ExperimentConfig{}, o);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{77}));
    EXPECT_EQ(output_dir(c, o), fs::path("elsewhere"));
    EXPECT_EQ(output_dir(ExperimentConfig{}, RunOptions{}), fs::path("out"));
}

// --- synth / recon --------------------------------------------------------------

TEST(Synth, WritesDatasetAndIsDeterministic) {
    const auto a = scratch("synth_a"), b = scratch("synth_b");
    const auto c = tiny_config();
    const auto r = run_synth(c, opts(a));
    EXPECT_GT(r.epsilon, 0.0);
    run_synth(c, opts(b));
    EXPECT_EQ(io::read_file(a / "arrays.bin"), io::read_file(b / "arrays.bin"));
    EXPECT_EQ(io::read_file(a / "manifest.json"), io::read_file(b / "manifest.json"));
    EXPECT_EQ(io::csv_body(io::read_file(a / "results" / "synth.csv")),
              io::csv_body(io::read_file(b / "results" / "synth.csv")));
    EXPECT_TRUE(fs::exists(a / "results" / "synth_config.json"));
    EXPECT_THROW(run_synth(c, opts(a)), ValidationError);
    EXPECT_NO_THROW(run_synth(c, opts(a, true)));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Synth, ZeroSourceGivesZeroTraces) {
    auto c = tiny_config();
    c.source.clear();
    const auto dir = scratch("synth_zero");
    EXPECT_EQ(run_synth(c, opts(dir)).epsilon, 0.0);
    const auto files = io::read_dataset(dir);
    for (const auto& t : files.dataset.traces)
        for (const auto& u : t.u) EXPECT_EQ(u, cplx(0.0, 0.0));
    const auto rec = run_recon(c, dir, opts(dir));
    EXPECT_EQ(rec.status, "zero_truth");
    EXPECT_FALSE(rec.rel_error.has_value());
    EXPECT_EQ(rec.max_abs_real, 0.0);
    fs::remove_all(dir);
}

TEST(Recon, ReproducesTheSweepCell) {
    const auto c = tiny_config();
    const auto dir = scratch("recon");
    run_synth(c, opts(dir));
    const auto r = run_recon(c, dir, opts(dir));
    ASSERT_TRUE(r.rel_error.has_value());
    EXPECT_EQ(r.status, "ok");
    inverse::SweepContext ctx(c.sweep_config());
    EXPECT_EQ(*r.rel_error, ctx.run_cell(c.sigmas[0], c.Ks[0], 0.0, c.seeds[0]).rel_error);
    EXPECT_TRUE(fs::exists(dir / "recon" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "results" / "recon.csv"));
    fs::remove_all(dir);
}

TEST(Recon, TruncatedPayloadIsANamedError) {
    const auto c = tiny_config();
    const auto dir = scratch("recon_trunc");
    run_synth(c, opts(dir));
    const auto payload = io::read_file(dir / "arrays.bin");
    io::atomic_write(dir / "arrays.bin", payload.substr(0, payload.size() / 2));
    try {
        run_recon(c, dir, opts(dir));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("array '"), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

// --- timesim ----------------------------------------------------------------------

TEST(Timesim, ZeroSourceWritesTheSkipSentinel) {
    auto c = parse_config(R"({"R": 1.0, "R_hat": 0.7, "source": [], "times": [1, 10, 100],
                              "box": {"L": 4, "n": 16, "xi_cut": null}})");
    const auto dir = scratch("timesim_zero");
    const auto r = run_timesim(c, opts(dir));
    ASSERT_EQ(r.fits.size(), 2u);
    for (const auto& f : r.fits) {
        EXPECT_EQ(f.status, "skipped_zero_series");
        EXPECT_FALSE(f.slope.has_value());
    }
    const auto csv = io::read_file(dir / "results" / "decay_fit.csv");
    EXPECT_NE(csv.find("skipped_zero_series"), std::string::npos);
    EXPECT_NE(csv.find("sigma [1],quantity [-],slope [1]"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Timesim, GuardAbortCarriesTheTime) {
    auto c = parse_config(R"({"R": 1.0, "R_hat": 0.7, "times": [0.5, 2, 20],
        "source": [{"type": "gaussian", "center": [0,0,0], "width": 0.1, "amplitude": 1.0}],
        "box": {"L": 2, "n": 16, "xi_cut": null}})");
    const auto dir = scratch("timesim_guard");
    try {
        run_timesim(c, opts(dir));
        FAIL() << "expected WrapAroundError";
    } catch (const timedomain::WrapAroundError& e) {
        EXPECT_GT(e.time, 0.0);
        EXPECT_NE(std::string(e.what()).find("t = "), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

TEST(Timesim, RequiresSomethingToRun) {
    EXPECT_THROW(run_timesim(ExperimentConfig{}, opts(scratch("timesim_empty"))), ValidationError);
}

// --- sweep ---------------------------------------------------------------------------

TEST(Sweep, SingleCellSingleRow) {
    const auto dir = scratch("sweep_one");
    const auto r = run_sweep(tiny_config(), opts(dir));
    EXPECT_EQ(r.records.size(), 1u);
    EXPECT_TRUE(r.failures.empty());
    const auto body = io::csv_body(io::read_file(dir / "results" / "sweep.csv"));
    std::size_t lines = 0;
    for (char ch : body) lines += ch == '\n';
    EXPECT_EQ(lines, 3u);  // config hash, header, one row
    const auto summary = io::read_file(dir / "results" / "sweep_summary.csv");
    EXPECT_NE(summary.find("# config_hash: " + tiny_config().hash()), std::string::npos);
    for (const auto& v : r.verdicts) EXPECT_EQ(v.verdict, "n/a");
    fs::remove_all(dir);
}

TEST(Sweep, IdenticalRunsGiveIdenticalBodies) {
    auto c = tiny_config();
    c.sigmas = {0.1, 1.0};
    c.noise_levels = {0.0, 0.05};
    c.seeds = {1, 2};
    const auto a = scratch("sweep_a"), b = scratch("sweep_b");
    run_sweep(c, opts(a));
    run_sweep(c, opts(b));
    for (const char* name : {"sweep.csv", "sweep_summary.csv"})
        EXPECT_EQ(io::csv_body(io::read_file(a / "results" / name)), io::csv_body(io::read_file(b / "results" / name)));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Sweep, FailedCellsAreRecordedAndTheSweepContinues) {
    // A zero source has no relative error, so every cell fails.
    auto c = tiny_config();
    c.source.clear();
    c.Ks = {3.0, 4.0};
    const auto dir = scratch("sweep_fail");
    const auto r = run_sweep(c, opts(dir));
    EXPECT_TRUE(r.records.empty());
    ASSERT_EQ(r.failures.size(), 2u);
    EXPECT_EQ(r.failures[1].K, 4.0);
    const auto csv = io::read_file(dir / "results" / "sweep.csv");
    EXPECT_NE(csv.find("error: sweep cell (sigma=0.100000, K=4.000000"), std::string::npos) << csv;
    for (const auto& v : r.verdicts) EXPECT_EQ(v.verdict, "incomplete");
    fs::remove_all(dir);
}

TEST(TrendVerdicts, PassFailIncompleteAndNotApplicable) {
    auto rec = [](double sigma, double K, double e) {
        inverse::StabilityRecord r;
        r.sigma = sigma;
        r.K = K;
        r.rel_error = e;
        return r;
    };
    // K trend at sigma 0.1: 0.5, 0.3, 0.31 (within 5%) passes; sigma trend at
    // K = 8: 0.5 then 0.4 fails the nondecreasing check.
    const std::vector<inverse::StabilityRecord> rs{rec(0.1, 8, 0.5), rec(0.1, 16, 0.3), rec(0.1, 32, 0.31),
                                                   rec(1.0, 8, 0.4)};
    const auto v = trend_verdicts(rs, {}, 0.05);
    auto find = [&](const std::string& check, double fixed) {
        for (const auto& x : v)
            if (x.check == check && x.fixed == fixed) return x.verdict;
        return std::string("missing");
    };
    EXPECT_EQ(find("monotone_in_K", 0.1), "pass");
    EXPECT_EQ(find("monotone_in_K", 1.0), "n/a");
    EXPECT_EQ(find("monotone_in_sigma", 8), "fail");
    EXPECT_EQ(find("monotone_in_sigma", 16), "n/a");

    const auto w = trend_verdicts(rs, {{0.1, 64, 0.0, 0, "boom"}}, 0.05);
    for (const auto& x : w)
        if (x.check == "monotone_in_K" && x.fixed == 0.1) EXPECT_EQ(x.verdict, "incomplete");
}

// --- verify ------------------------------------------------------------------------------

TEST(Verify, RefusesToOverwriteReports) {
    const auto dir = scratch("verify");
    io::atomic_write(dir / "results" / "verify.json", "{}");
    EXPECT_THROW(run_verify(opts(dir)), ValidationError);
    fs::remove_all(dir);
}
