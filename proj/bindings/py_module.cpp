#include "tbmps/config_io.hpp"
#include "tbmps/engine.hpp"
#include "tbmps/markovian.hpp"
#include "tbmps/observables.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

namespace py = pybind11;
using namespace tbmps;

namespace {

ExperimentConfig config_from_json_string(const std::string& text) {
    return parse_config_json(nlohmann::json::parse(text));
}

py::array_t<double> to_array(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

/// Finished evolution: the chain plus the bookkeeping needed to evaluate
/// output-field observables.
struct FinalState {
    ExperimentConfig cfg;
    EvolutionState state;

    std::size_t channel() const { return cfg.setup == Setup::TwoAtoms ? 1 : 0; }
    std::int64_t k_max() const { return state.k; }
};

FinalState run_config(const ExperimentConfig& cfg, std::size_t record_stride,
                      ObservableSeries* series_out) {
    RunOptions options;
    options.record_stride = record_stride == 0 ? cfg.record_stride : record_stride;
    options.record_entropy = true;
    auto result = run(cfg, options);
    if (series_out) *series_out = std::move(result.series);
    return FinalState{cfg, std::move(result.state)};
}

py::dict series_to_dict(const ObservableSeries& series) {
    std::vector<double> t, pe1, pe2, nd, norm, dw;
    for (const auto& row : series.rows) {
        t.push_back(row.t);
        pe1.push_back(row.pe1);
        pe2.push_back(row.pe2);
        nd.push_back(row.n_delay);
        norm.push_back(row.norm);
        dw.push_back(row.disc_weight);
    }
    std::vector<double> et, eta, es;
    for (const auto& row : series.entropy) {
        et.push_back(row.t);
        eta.push_back(row.t_a);
        es.push_back(row.s_bits);
    }
    py::dict out;
    out["t"] = to_array(t);
    out["pe1"] = to_array(pe1);
    out["pe2"] = to_array(pe2);
    out["n_delay"] = to_array(nd);
    out["norm"] = to_array(norm);
    out["disc_weight"] = to_array(dw);
    py::dict entropy;
    entropy["t"] = to_array(et);
    entropy["t_A"] = to_array(eta);
    entropy["S"] = to_array(es);
    out["entropy"] = entropy;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "time-bin matrix product state simulator for waveguide circuits with delay";

    py::class_<FinalState>(m, "FinalState")
        .def_property_readonly("n_sites",
                               [](const FinalState& s) { return s.state.chain.n_sites(); })
        .def_property_readonly("max_bond_dim",
                               [](const FinalState& s) { return s.state.chain.max_bond_dim(); })
        .def_property_readonly(
            "discarded_weight",
            [](const FinalState& s) { return s.state.cumulative_discarded; })
        .def_property_readonly("steps", [](const FinalState& s) { return s.state.k; })
        .def("norm", [](const FinalState& s) { return s.state.chain.norm_full(); })
        .def("populations",
             [](const FinalState& s) {
                 return to_array(system_populations(s.state.chain, s.cfg.setup));
             })
        .def("schmidt_spectrum",
             [](const FinalState& s, std::size_t bond) {
                 return to_array(s.state.chain.schmidt_spectrum(bond).weights);
             })
        .def("circuit_entropy",
             [](const FinalState& s) {
                 const auto bond = s.state.delay_window().first;
                 return s.state.chain.schmidt_spectrum(bond).entropy_bits();
             })
        .def("entropy_profile",
             [](const FinalState& s, double t_a_max) {
                 const auto profile = entropy_profile(s.state.chain, s.state.k, s.state.ell,
                                                      s.cfg.dt, t_a_max);
                 py::dict out;
                 out["t_A"] = to_array(profile.t_a);
                 out["S"] = to_array(profile.s_bits);
                 return out;
             },
             py::arg("t_a_max"))
        .def("photon_distribution",
             [](const FinalState& s, std::size_t n_max) {
                 const auto [first, last] = s.state.delay_window();
                 const auto dist = delay_photon_distribution(
                     s.state.chain, first, last, BinOperators::build(s.cfg), n_max);
                 return py::make_tuple(to_array(dist.p), dist.tail_mass);
             },
             py::arg("n_max") = 8)
        .def("output_spectrum",
             [](const FinalState& s, py::array_t<double> nu, std::size_t m, bool incoherent) {
                 std::vector<double> grid(nu.data(), nu.data() + nu.size());
                 const auto spec =
                     output_spectrum(s.state.chain, s.k_max(), s.state.ell,
                                     BinOperators::build(s.cfg), grid, m, incoherent,
                                     s.channel());
                 return to_array(spec);
             },
             py::arg("nu"), py::arg("m"), py::arg("incoherent") = true)
        .def("g2",
             [](const FinalState& s, std::size_t p_max) {
                 return to_array(g2_function(s.state.chain, s.k_max(), s.state.ell,
                                             BinOperators::build(s.cfg), p_max, s.channel()));
             },
             py::arg("p_max"))
        .def("output_flux",
             [](const FinalState& s) {
                 return output_flux(s.state.chain, s.k_max(), s.state.ell,
                                    BinOperators::build(s.cfg), s.channel());
             })
        .def("save_snapshot", [](const FinalState& s, const std::string& path) {
            std::ofstream out(path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open " + path);
            s.state.chain.save_snapshot(out);
        });

    m.def(
        "run",
        [](const std::string& config_json, std::size_t record_stride) {
            const auto cfg = config_from_json_string(config_json);
            ObservableSeries series;
            auto state = run_config(cfg, record_stride, &series);
            return py::make_tuple(std::move(state), series_to_dict(series));
        },
        py::arg("config_json"), py::arg("record_stride") = 0,
        "Evolves the configured experiment; returns (final_state, series)");

    m.def(
        "run_file",
        [](const std::string& path, std::size_t record_stride) {
            const auto cfg = parse_config_file(path);
            ObservableSeries series;
            auto state = run_config(cfg, record_stride, &series);
            return py::make_tuple(std::move(state), series_to_dict(series));
        },
        py::arg("config_path"), py::arg("record_stride") = 0);

    m.def(
        "validate_config",
        [](const std::string& config_json) {
            return config_to_json(config_from_json_string(config_json)).dump();
        },
        py::arg("config_json"), "Parses, validates, and normalizes a configuration");

    m.def(
        "single_atom_bloch",
        [](double gamma, std::complex<double> omega, double delta, py::array_t<double> t_grid,
           double substep) {
            std::vector<double> grid(t_grid.data(), t_grid.data() + t_grid.size());
            const auto series = integrate_single_atom_bloch(gamma, omega, delta, grid, substep);
            std::vector<double> pe;
            for (const auto& rho : series) pe.push_back(rho.population(1));
            return to_array(pe);
        },
        py::arg("gamma"), py::arg("omega"), py::arg("delta"), py::arg("t_grid"),
        py::arg("substep"), "Excited-state population of the driven damped atom on t_grid");

    m.def("bloch_steady_pe", &bloch_steady_pe, py::arg("gamma"), py::arg("omega"),
          py::arg("delta"));

    m.def(
        "mirror_effective_bloch",
        [](const std::string& config_json) {
            const auto eb = mirror_effective_bloch(config_from_json_string(config_json));
            py::dict out;
            out["gamma_eff"] = eb.gamma_eff;
            out["delta_eff"] = eb.delta_eff;
            out["pe_steady"] = eb.pe_steady;
            return out;
        },
        py::arg("config_json"));

    m.def(
        "two_atom_master_eq",
        [](const std::string& config_json, py::array_t<double> t_grid) {
            const auto cfg = config_from_json_string(config_json);
            std::vector<double> grid(t_grid.data(), t_grid.data() + t_grid.size());
            const auto series = integrate_two_atom_master_eq(cfg, grid);
            py::array_t<std::complex<double>> out(
                {static_cast<py::ssize_t>(series.size()), py::ssize_t(4), py::ssize_t(4)});
            auto view = out.mutable_unchecked<3>();
            for (py::ssize_t s = 0; s < view.shape(0); ++s)
                for (py::ssize_t i = 0; i < 4; ++i)
                    for (py::ssize_t j = 0; j < 4; ++j)
                        view(s, i, j) = series[static_cast<std::size_t>(s)].m.at2(
                            static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            return out;
        },
        py::arg("config_json"), py::arg("t_grid"));

    m.def(
        "dense_reference_fidelity",
        [](const std::string& config_json, std::size_t n_steps) {
            auto cfg = config_from_json_string(config_json);
            cfg.t_max = static_cast<double>(n_steps) * cfg.dt;
            auto result = run(cfg);
            return fidelity_with_chain(brute_force_evolve(cfg, n_steps), result.state.chain);
        },
        py::arg("config_json"), py::arg("n_steps"),
        "Fidelity between the chain evolution and the dense state-vector reference");

    m.attr("__version__") = TBMPS_VERSION;
}
