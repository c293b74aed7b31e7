#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "biplate/core.hpp"
#include "biplate/forward.hpp"
#include "biplate/harness.hpp"
#include "biplate/inverse.hpp"
#include "biplate/oracles.hpp"
#include "biplate/timedomain.hpp"

namespace py = pybind11;
using namespace biplate;

namespace {

harness::RunOptions run_options(const std::string& out, bool force, std::optional<std::uint64_t> seed) {
    harness::RunOptions o;
    o.out = out;
    o.force = force;
    o.seed = seed;
    return o;
}

py::array_t<cplx> complex_array(const std::vector<cplx>& v) { return py::array_t<cplx>(v.size(), v.data()); }

py::array_t<cplx> vec3_array(const std::vector<CVec3>& v) {
    py::array_t<cplx> out({v.size(), std::size_t{3}});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t c = 0; c < 3; ++c) m(i, c) = v[i][c];
    return out;
}

py::dict synthesize(const std::string& config_json, double k, double sigma) {
    const auto c = harness::parse_config(config_json);
    const auto f = c.make_source();
    const auto grid = SphereGrid::make(c.R, c.n_sphere, c.sphere_rule);
    const auto t = forward::synthesize_cauchy(f, grid, k, sigma);
    py::array_t<double> pts({grid.size(), std::size_t{3}});
    auto m = pts.mutable_unchecked<2>();
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) m(i, j) = grid.points()[i][j];
    py::dict d;
    d["k"] = t.k;
    d["points"] = pts;
    d["weights"] = py::array_t<double>(grid.size(), grid.weights().data());
    d["u"] = complex_array(t.u);
    d["grad_u"] = vec3_array(t.grad_u);
    d["lap_u"] = complex_array(t.lap_u);
    d["grad_lap_u"] = vec3_array(t.grad_lap_u);
    d["boundary_norm_sq"] = boundary_norm_sq(t, grid);
    return d;
}

py::dict sweep(const std::string& config_json, const std::string& out, bool force) {
    const auto r = harness::run_sweep(harness::parse_config(config_json), run_options(out, force, std::nullopt));
    py::list records, failures, verdicts;
    for (const auto& x : r.records)
        records.append(py::dict(py::arg("sigma") = x.sigma, py::arg("K") = x.K, py::arg("noise") = x.noise,
                                py::arg("seed") = x.seed, py::arg("epsilon") = x.epsilon,
                                py::arg("rel_error") = x.rel_error, py::arg("Q") = x.Q, py::arg("n") = x.n,
                                py::arg("imag_residue") = x.imag_residue));
    for (const auto& x : r.failures)
        failures.append(py::dict(py::arg("sigma") = x.sigma, py::arg("K") = x.K, py::arg("noise") = x.noise,
                                 py::arg("seed") = x.seed, py::arg("message") = x.message));
    for (const auto& x : r.verdicts)
        verdicts.append(py::dict(py::arg("check") = x.check, py::arg("fixed") = x.fixed, py::arg("noise") = x.noise,
                                 py::arg("seed") = x.seed, py::arg("errors") = x.errors,
                                 py::arg("verdict") = x.verdict));
    py::dict d;
    d["records"] = records;
    d["failures"] = failures;
    d["verdicts"] = verdicts;
    d["config_hash"] = r.config_hash;
    return d;
}

py::dict timesim(const std::string& config_json, const std::string& out, bool force) {
    const auto r = harness::run_timesim(harness::parse_config(config_json), run_options(out, force, std::nullopt));
    py::list fits, energy, obs;
    for (const auto& f : r.fits)
        fits.append(py::dict(py::arg("sigma") = f.sigma, py::arg("quantity") = f.quantity, py::arg("slope") = f.slope,
                             py::arg("status") = f.status));
    for (std::size_t i = 0; i < r.energy.size(); ++i) {
        const auto& e = r.energy[i];
        energy.append(py::dict(py::arg("sigma") = r.energy_sigmas[i], py::arg("t1") = e.t1, py::arg("t2") = e.t2,
                               py::arg("E0_t1") = e.E0_t1, py::arg("E0_t2") = e.E0_t2, py::arg("F2") = e.F2,
                               py::arg("margin") = e.margin));
    }
    for (std::size_t i = 0; i < r.observability.size(); ++i) {
        const auto& o = r.observability[i];
        obs.append(py::dict(py::arg("sigma") = r.observability_sigmas[i], py::arg("T") = o.T,
                            py::arg("ratio") = o.ratio, py::arg("refined_ratio") = r.observability_refined[i],
                            py::arg("degenerate") = o.degenerate));
    }
    py::dict d;
    d["fits"] = fits;
    d["energy"] = energy;
    d["observability"] = obs;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Damped plate inverse source laboratory";

    static py::exception<timedomain::WrapAroundError> wrap_error(m, "WrapAroundError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const timedomain::WrapAroundError& e) {
            wrap_error(e.what());
        } catch (const ValidationError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("kappa", py::overload_cast<cplx, double>(&kappa_of), py::arg("k"), py::arg("sigma"),
          "Fourth root of k^2 + i k sigma in the first quadrant.");
    m.def(
        "green_kernel",
        [](double r, cplx kappa) {
            const auto g = forward::green_kernel(r, kappa);
            return py::dict(py::arg("G") = g.G, py::arg("dG_dr") = g.dG_dr, py::arg("lapG") = g.lapG,
                            py::arg("dlapG_dr") = g.dlapG_dr);
        },
        py::arg("r"), py::arg("kappa"));
    m.def(
        "multiplier",
        [](double t, double xi, double sigma) {
            const auto v = timedomain::multiplier_values(t, xi, sigma);
            return py::make_tuple(v.m, v.dm, v.d2m);
        },
        py::arg("t"), py::arg("xi"), py::arg("sigma"), "(m, m', m'') of the damped time multiplier.");
    m.def(
        "mu",
        [](double z, double delta, double K, double d) { return inverse::mu_lower_bound(z, {delta, K, d}); },
        py::arg("z"), py::arg("delta"), py::arg("K"), py::arg("d"));
    m.def("mu_high_precision", &oracles::mu_high_precision, py::arg("z"), py::arg("delta"), py::arg("K"),
          py::arg("d"));
    m.def(
        "decay_fit",
        [](const std::vector<double>& t, const std::vector<double>& y) { return timedomain::decay_fit(t, y); },
        py::arg("times"), py::arg("sup_norms"), "Least-squares slope of log y against log(1 + t).");
    m.def(
        "time_to_frequency",
        [](const std::vector<double>& times, const std::vector<double>& values, std::size_t n_points,
           const std::vector<double>& k) {
            return complex_array(timedomain::time_to_frequency(times, values, n_points, k));
        },
        py::arg("times"), py::arg("values"), py::arg("n_points"), py::arg("k"));

    m.def("default_config", &harness::default_config_json);
    m.def(
        "config_hash", [](const std::string& json) { return harness::parse_config(json).hash(); }, py::arg("config"));
    m.def("synthesize", &synthesize, py::arg("config"), py::arg("k"), py::arg("sigma"),
          "Cauchy trace of the config's source on its measurement sphere.");
    m.def(
        "run_synth",
        [](const std::string& config, const std::string& out, bool force, std::optional<std::uint64_t> seed) {
            const auto r = harness::run_synth(harness::parse_config(config), run_options(out, force, seed));
            return py::dict(py::arg("dir") = r.dir.string(), py::arg("epsilon") = r.epsilon);
        },
        py::arg("config"), py::arg("out"), py::arg("force") = false, py::arg("seed") = py::none());
    m.def(
        "run_recon",
        [](const std::string& config, const std::string& dataset, const std::string& out, bool force) {
            const auto r = harness::run_recon(harness::parse_config(config), dataset, run_options(out, force, std::nullopt));
            return py::dict(py::arg("status") = r.status, py::arg("rel_error") = r.rel_error,
                            py::arg("imag_residue") = r.imag_residue, py::arg("max_abs_real") = r.max_abs_real);
        },
        py::arg("config"), py::arg("dataset"), py::arg("out"), py::arg("force") = false);
    m.def("run_sweep", &sweep, py::arg("config"), py::arg("out"), py::arg("force") = false);
    m.def("run_timesim", &timesim, py::arg("config"), py::arg("out"), py::arg("force") = false);
    m.def(
        "verify",
        [](const std::string& out) {
            const auto r = harness::run_verify(run_options(out, false, std::nullopt));
            return oracles::verify_report_json(r);
        },
        py::arg("out"), "Runs every oracle; returns the JSON report.");
}
