#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ustatbench/cli.hpp"
#include "ustatbench/errors.hpp"
#include "ustatbench/montecarlo.hpp"
#include "ustatbench/sampling.hpp"
#include "ustatbench/ustat.hpp"

namespace py = pybind11;
using namespace ustatbench;

namespace {

std::vector<double> py_sample(const std::string& dist, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    return sample(DistributionSpec::parse(dist), n, Seed{seed, stream});
}

std::vector<double> py_prefix_u(const std::string& kernel, std::size_t m, const std::vector<double>& xs, bool oracle) {
    const Kernel k = catalog::make(kernel, m);
    return (oracle ? prefix_u_oracle(k, xs) : prefix_u_path(k, xs)).values;
}

py::dict py_run_experiment(const std::string& experiment, std::uint64_t seed,
                           const std::map<std::string, std::string>& keys) {
    ExperimentConfig cfg = config_from_keys(parse_experiment(experiment), keys);
    cfg.seed = seed;
    McReport rep;
    {
        py::gil_scoped_release release;
        rep = run_experiment(cfg);
    }
    py::list rows;
    for (const auto& r : rep.rows) {
        py::dict row;
        row["n"] = r.n;
        row["stream"] = r.stream;
        row["flagged"] = r.flagged;
        for (std::size_t c = 0; c < rep.columns.size(); ++c) row[py::str(rep.columns[c])] = r.values[c];
        rows.append(row);
    }
    py::dict out;
    out["columns"] = rep.columns;
    out["rows"] = rows;
    out["aggregates"] = rep.aggregates;
    out["config_hash"] = config_hash(cfg);
    return out;
}

py::tuple py_run_cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

} // namespace

PYBIND11_MODULE(_ustatbench, m) {
    m.doc() = "Bindings for the ustatbench C++ core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
    py::register_exception<ResourceError>(m, "ResourceError", base.ptr());
    py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
    py::register_exception<EstimationError>(m, "EstimationError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ExperimentError>(m, "ExperimentError", base.ptr());

    m.def("version", &version);
    m.def("sample", &py_sample, py::arg("dist"), py::arg("n"), py::arg("seed"), py::arg("stream") = 0,
          "n i.i.d. draws, e.g. sample('example-pareto a=2', 1000, seed=7).");
    m.def("prefix_u", &py_prefix_u, py::arg("kernel"), py::arg("m"), py::arg("xs"), py::arg("oracle") = false,
          "U_k for k = m..n.");
    m.def("sup_abs_wiener_cdf", &sup_abs_wiener_cdf, py::arg("x"));
    m.def("run_experiment", &py_run_experiment, py::arg("experiment"), py::arg("seed"),
          py::arg("keys") = std::map<std::string, std::string>{},
          "Runs clt, fclt, thm3, miller-sen or decompose with config-file keys.");
    m.def("run_cli", &py_run_cli, py::arg("args"), "Returns (exit_code, stdout, stderr).");
    m.attr("EXIT_OK") = kExitOk;
    m.attr("EXIT_CONFIG") = kExitConfig;
    m.attr("EXIT_ASSERTION") = kExitAssertion;
}
