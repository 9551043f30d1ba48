#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "loceq/dynamics.hpp"
#include "loceq/ensembles.hpp"
#include "loceq/errors.hpp"
#include "loceq/flow.hpp"
#include "loceq/graph_analysis.hpp"
#include "loceq/io.hpp"

namespace py = pybind11;
using namespace loceq;

namespace {

ObservableMode parse_mode(const std::string& mode) {
  if (mode == "randomised") return ObservableMode::kRandomised;
  if (mode == "homogeneous") return ObservableMode::kHomogeneous;
  throw DomainError("unknown observable mode '" + mode + "'");
}

WeightModel weights_from(const py::object& w) {
  WeightModel m;
  if (w.is_none()) return m;
  const auto d = w.cast<py::dict>();
  if (d.contains("diag_slope")) m.diag_slope = d["diag_slope"].cast<double>();
  if (d.contains("diag_intercept")) m.diag_intercept = d["diag_intercept"].cast<double>();
  if (d.contains("sigma_off")) m.sigma_off = d["sigma_off"].cast<double>();
  return m;
}

struct Sample {
  std::string variant;
  LocalitySpec locality;
  std::uint64_t seed;
  EnsembleSample data;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Locality, random graph ensembles and equilibration times of spin chains.";
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  m.attr("__version__") = std::string(code_version());

  m.def("degree_formula", py::overload_cast<int, int, int>(&degree_formula),
        py::arg("L"), py::arg("n"), py::arg("d"),
        "Node degree of the adjacency graph of an (L, n, d) Hamiltonian.");

  m.def(
      "weight_model",
      [](int n, int d, std::vector<int> sizes, std::size_t samples, std::uint64_t seed) {
        const auto stats = measure_weight_statistics(n, d, sizes, samples, seed);
        LinearFit fit;
        const auto w = fit_weight_model(stats, &fit);
        return py::dict(py::arg("diag_slope") = w.diag_slope,
                        py::arg("diag_intercept") = w.diag_intercept,
                        py::arg("sigma_off") = w.sigma_off, py::arg("r_squared") = fit.r_squared,
                        py::arg("sigma_diag") = stats.sigma_diag,
                        py::arg("sigma_off_by_size") = stats.sigma_off);
      },
      py::arg("n"), py::arg("d"), py::arg("sizes"), py::arg("samples") = 100,
      py::arg("seed") = 1, "Entry statistics of exact Hamiltonians and their affine fit.");

  py::class_<Sample>(m, "Sample")
      .def_property_readonly("variant", [](const Sample& s) { return s.variant; })
      .def_property_readonly("L", [](const Sample& s) { return s.locality.sites; })
      .def_property_readonly("n", [](const Sample& s) { return s.locality.bodies; })
      .def_property_readonly("d", [](const Sample& s) { return s.locality.diameter; })
      .def_property_readonly("seed", [](const Sample& s) { return s.seed; })
      .def_property_readonly("dim", [](const Sample& s) { return s.data.hamiltonian.dim(); })
      .def_property_readonly("nonzeros",
                             [](const Sample& s) { return s.data.hamiltonian.nonzero_count(); })
      .def_property_readonly("raw_norm", [](const Sample& s) { return s.data.raw_norm; })
      .def_property_readonly("observable",
                             [](const Sample& s) { return s.data.observable.eigenvalues(); })
      .def("dense", [](const Sample& s) { return s.data.hamiltonian.to_dense(); },
           "Normalised Hamiltonian in the observable eigenbasis.")
      .def("edges", [](const Sample& s) { return adjacency_of(s.data.hamiltonian).edges(); })
      .def("degrees", [](const Sample& s) { return degrees(adjacency_of(s.data.hamiltonian)); })
      .def("band_violations", [](const Sample& s) {
        return band_violations(adjacency_of(s.data.hamiltonian),
                               ensemble_band(s.locality, s.data.observable));
      });

  m.def(
      "sample",
      [](const std::string& variant, int L, int n, int d, std::uint64_t seed,
         const std::string& obs_mode, const py::object& weights) {
        const EnsembleSpec spec{parse_variant(variant), {L, n, d}, parse_mode(obs_mode), seed};
        return Sample{variant, spec.locality, seed, draw(spec, weights_from(weights))};
      },
      py::arg("variant"), py::arg("L"), py::arg("n") = 2, py::arg("d") = 1,
      py::arg("seed") = 1, py::arg("obs_mode") = "randomised", py::arg("weights") = py::none(),
      "Draws one normalised Hamiltonian (N <= 4096).");

  m.def(
      "evolve",
      [](const Sample& s, std::vector<double> times) {
        const auto r = evolve(s.data.hamiltonian, s.data.observable,
                              default_initial_node(s.data.observable), times);
        return py::make_tuple(r.exp_o, r.exp_o2);
      },
      py::arg("sample"), py::arg("times"), "<O>(t) and <O^2>(t) from the top node.");

  m.def(
      "equilibration_time",
      [](const Sample& s, double margin, double horizon) {
        EquilibrationOptions o;
        o.margin = margin;
        o.horizon = horizon;
        const auto r = equilibration_time(s.data.hamiltonian, s.data.observable,
                                          default_initial_node(s.data.observable), o);
        return py::dict(py::arg("t_eq") = r.t_eq, py::arg("diag_o") = r.diag_o,
                        py::arg("diag_o2") = r.diag_o2, py::arg("reached") = r.reached());
      },
      py::arg("sample"), py::arg("margin") = 0.1, py::arg("horizon") = 0.0);

  m.def(
      "max_flow",
      [](const Sample& s, std::optional<double> diag_o) {
        const auto ends = flow_endpoints(s.data.observable, diag_o);
        return max_flow(capacity_graph(s.data.hamiltonian, ends.source, ends.sink));
      },
      py::arg("sample"), py::arg("diag_o") = py::none(),
      "Maximum flow from the top node to the node closest to diag_o.");

  m.def(
      "read_matrix",
      [](const std::string& path) { return read_matrix(std::filesystem::path(path)).to_dense(); },
      py::arg("path"), "Dense copy of a matrix file written by `loceq generate`.");
}
