#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chb/verify.hpp"

namespace py = pybind11;

namespace {

/// Cell field as a (ny, nx) array indexed [j, i].
py::array_t<double> to_array(const chb::CellField& f) {
    py::array_t<double> a({f.ny(), f.nx()});
    std::copy(f.data(), f.data() + f.size(), a.mutable_data());
    return a;
}

py::list table_rows(const chb::ConvergenceTable& t) {
    py::list rows;
    for (const auto& r : t.rows)
        rows.append(py::dict(py::arg("n") = r.n, py::arg("h") = r.h, py::arg("error") = r.error,
                             py::arg("order") = r.order));
    return rows;
}

py::dict simulate(const chb::RunConfig& cfg, std::optional<int> steps) {
    chb::Model m = cfg.model();
    chb::State s0;
    chb::RunResult r;
    {
        py::gil_scoped_release release;
        chb::validate_config(cfg);
        s0 = chb::initial_state_from(cfg);
        chb::RunOptions ro;
        ro.steps = steps.value_or(cfg.steps());
        r = chb::run(s0, cfg.scheme(), m, ro);
    }
    chb::SnapshotData snap = chb::snapshot_of(r.final_state, m.grid);
    auto columns = chb::timeseries_columns();
    py::array_t<double> ts({static_cast<py::ssize_t>(r.rows.size()), static_cast<py::ssize_t>(columns.size())});
    auto w = ts.mutable_unchecked<2>();
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
        const auto& row = r.rows[k];
        const double vals[] = {row.t,           row.energy,       row.mass_phi,     row.mass_sigma,
                               row.diss_mu,     row.diss_nsigma,  row.diss_visc,    row.bnd_sigma_sq,
                               row.src_phi_mu,  row.src_sigma_N,  row.bnd_income,   row.budget_residual,
                               row.div_residual, row.phi_min,     row.phi_max,      row.cg_iters_total};
        for (std::size_t c = 0; c < columns.size(); ++c) w(static_cast<py::ssize_t>(k), static_cast<py::ssize_t>(c)) = vals[c];
    }
    py::dict out;
    out["t"] = r.final_state.t;
    out["phi"] = to_array(snap.phi);
    out["mu"] = to_array(snap.mu);
    out["sigma"] = to_array(snap.sigma);
    out["p"] = to_array(snap.p);
    out["vx"] = to_array(snap.vx);
    out["vy"] = to_array(snap.vy);
    out["timeseries"] = ts;
    out["columns"] = columns;
    out["completed"] = r.completed;
    out["failure"] = r.failure;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Cahn-Hilliard-Brinkman tumour growth simulator";

    py::register_exception<chb::ConfigError>(mod, "ConfigError", PyExc_ValueError);

    py::class_<chb::Grid>(mod, "Grid")
        .def_readonly("Lx", &chb::Grid::Lx)
        .def_readonly("Ly", &chb::Grid::Ly)
        .def_readonly("nx", &chb::Grid::nx)
        .def_readonly("ny", &chb::Grid::ny)
        .def_readonly("hx", &chb::Grid::hx)
        .def_readonly("hy", &chb::Grid::hy)
        .def("__repr__", [](const chb::Grid& g) {
            return "Grid(Lx=" + std::to_string(g.Lx) + ", Ly=" + std::to_string(g.Ly) + ", nx=" +
                   std::to_string(g.nx) + ", ny=" + std::to_string(g.ny) + ")";
        });
    mod.def("make_grid", &chb::make_grid, py::arg("Lx"), py::arg("Ly"), py::arg("nx"), py::arg("ny"));

    py::class_<chb::RunConfig>(mod, "RunConfig")
        .def(py::init<>())
        .def_readwrite("Lx", &chb::RunConfig::Lx)
        .def_readwrite("Ly", &chb::RunConfig::Ly)
        .def_readwrite("nx", &chb::RunConfig::nx)
        .def_readwrite("ny", &chb::RunConfig::ny)
        .def_readwrite("dt", &chb::RunConfig::dt)
        .def_readwrite("t_end", &chb::RunConfig::t_end)
        .def_readwrite("snapshot_every", &chb::RunConfig::snapshot_every)
        .def_readwrite("flow", &chb::RunConfig::flow)
        .def_property(
            "epsilon", [](const chb::RunConfig& c) { return c.params.epsilon; },
            [](chb::RunConfig& c, double v) { c.params.epsilon = v; })
        .def_property(
            "chi_sigma", [](const chb::RunConfig& c) { return c.params.chi_sigma; },
            [](chb::RunConfig& c, double v) { c.params.chi_sigma = v; })
        .def_property(
            "chi_phi", [](const chb::RunConfig& c) { return c.params.chi_phi; },
            [](chb::RunConfig& c, double v) { c.params.chi_phi = v; })
        .def_property(
            "nu", [](const chb::RunConfig& c) { return c.params.nu; },
            [](chb::RunConfig& c, double v) { c.params.nu = v; })
        .def_property(
            "b", [](const chb::RunConfig& c) { return c.params.b; },
            [](chb::RunConfig& c, double v) { c.params.b = v; })
        .def_property(
            "output_directory", [](const chb::RunConfig& c) { return c.output.directory; },
            [](chb::RunConfig& c, const std::string& v) { c.output.directory = v; })
        .def_property_readonly("grid", &chb::RunConfig::grid)
        .def_property_readonly("steps", &chb::RunConfig::steps)
        .def("to_text", [](const chb::RunConfig& c) { return chb::format_config(c); })
        .def("__eq__", [](const chb::RunConfig& a, const chb::RunConfig& b) { return a == b; });

    mod.def("parse_config", &chb::parse_config, py::arg("text"));
    mod.def("load_config", [](const std::filesystem::path& p) { return chb::load_config(p); }, py::arg("path"));

    mod.def(
        "validate",
        [](const chb::RunConfig& cfg) {
            py::list out;
            for (const auto& c : chb::validate_params(cfg.params, cfg.spec).checks)
                out.append(py::dict(py::arg("name") = c.name, py::arg("inequality") = c.inequality,
                                    py::arg("passed") = c.passed,
                                    py::arg("severity") = c.severity == chb::Severity::Error ? "error" : "warning"));
            return out;
        },
        py::arg("config"), "Every assumption check for the configuration's parameters.");

    mod.def("simulate", &simulate, py::arg("config"), py::arg("steps") = py::none(),
            "Runs a configuration in memory; returns the final cell-centred fields and the diagnostics.");

    mod.def(
        "execute",
        [](const chb::RunConfig& cfg) {
            chb::RunOutcome oc;
            {
                py::gil_scoped_release release;
                oc = chb::execute(cfg);
            }
            return py::dict(py::arg("directory") = oc.directory, py::arg("files") = oc.files,
                            py::arg("completed") = oc.result.completed, py::arg("failure") = oc.result.failure);
        },
        py::arg("config"), "Runs a configuration and writes its output files.");

    mod.def("timeseries_columns", &chb::timeseries_columns);

    mod.def(
        "mms_neumann_poisson", [](const std::vector<int>& ns) { return table_rows(chb::mms_neumann_poisson(ns)); },
        py::arg("ns") = std::vector<int>{16, 32, 64, 128});
    mod.def(
        "mms_robin_diffusion", [](const std::vector<int>& ns) { return table_rows(chb::mms_robin_diffusion(ns)); },
        py::arg("ns") = std::vector<int>{16, 32, 64, 128});

    mod.def(
        "brinkman_oracle",
        [](std::uint64_t seed, const std::vector<int>& ns, int trials) {
            py::list out;
            for (const auto& r : chb::brinkman_oracle_comparison(seed, ns, trials))
                out.append(py::dict(py::arg("n") = r.n, py::arg("trial") = r.trial,
                                    py::arg("max_difference") = r.max_difference,
                                    py::arg("div_residual") = r.div_residual, py::arg("iterations") = r.iterations,
                                    py::arg("converged") = r.converged));
            return out;
        },
        py::arg("seed") = 20240611, py::arg("ns") = std::vector<int>{6, 8, 12}, py::arg("trials") = 3);

    mod.def(
        "acceptance",
        [](const std::vector<int>& which, const std::filesystem::path& workdir) {
            std::vector<chb::CriterionResult> rs;
            {
                py::gil_scoped_release release;
                rs = chb::run_acceptance(which, workdir);
            }
            py::list out;
            for (const auto& r : rs)
                out.append(py::dict(py::arg("id") = r.id, py::arg("name") = r.name, py::arg("passed") = r.passed,
                                    py::arg("detail") = r.detail, py::arg("seconds") = r.seconds));
            return out;
        },
        py::arg("which") = std::vector<int>{}, py::arg("workdir") = std::filesystem::path{},
        "Runs the selected acceptance criteria (all when empty).");
}
