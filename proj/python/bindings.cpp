#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <stdexcept>

#include "mcfent/pipeline.hpp"

namespace py = pybind11;
using namespace mcfent;

namespace {

// Matrices cross the boundary as complex numpy arrays; the dimension is
// recovered from the size so callers never pass it separately.
DensityMatrix to_density(const CMatrix& m) {
  const auto n = m.rows();
  int d = 1;
  while (d * d < n) ++d;
  if (d * d != n || m.cols() != n) throw std::invalid_argument("density matrix must be d^2 x d^2");
  return DensityMatrix(d, m);
}

// json crosses as text; the Python side parses it with the json module
std::string report_text(const ExperimentConfig& cfg, const std::optional<std::string>& out_dir, unsigned threads) {
  py::gil_scoped_release release;
  return run_experiment(cfg, out_dir, threads).to_json().dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multicore-fiber entanglement distribution: states, channel, tomography and CGLMP metrics.";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

  m.def(
      "maximally_entangled", [](int dim) { return density_from_pure(maximally_entangled(dim)).matrix(); },
      py::arg("dim") = 4, "Density matrix of sum_k |kk> / sqrt(d).");
  m.def(
      "correlated_state",
      [](const std::vector<cplx>& coefficients) {
        return density_from_pure(make_correlated_state(std::span<const cplx>(coefficients))).matrix();
      },
      py::arg("coefficients"), "Density matrix of sum_k c_k |kk>, normalized.");
  m.def(
      "purity", [](const CMatrix& rho) { return purity(to_density(rho)); }, py::arg("rho"));
  m.def(
      "fidelity_to_max_entangled",
      [](const CMatrix& rho) {
        const DensityMatrix r = to_density(rho);
        return fidelity_to_pure(r, maximally_entangled(r.dim()));
      },
      py::arg("rho"));
  m.def(
      "schmidt_number", [](const CMatrix& rho) { return schmidt_number(to_density(rho)); }, py::arg("rho"));
  m.def(
      "subspace_concurrence", [](const CMatrix& rho, int i, int j) { return subspace_concurrence(to_density(rho), i, j); },
      py::arg("rho"), py::arg("i"), py::arg("j"), "Concurrence of the {|i>,|j>} x {|i>,|j>} block, 0-based cores.");
  m.def(
      "cglmp_value",
      [](const CMatrix& rho) {
        const DensityMatrix r = to_density(rho);
        return cglmp_value(r, cglmp_context(r.dim()));
      },
      py::arg("rho"));
  m.def(
      "cglmp_operator", [](int dim) { return cglmp_context(dim).bell_operator; }, py::arg("dim"));
  m.def(
      "optimize_cglmp_state",
      [](int dim) {
        const CglmpOptimum opt = optimize_cglmp_state(dim);
        return py::make_tuple(opt.value, opt.coefficients);
      },
      py::arg("dim"), "Largest CGLMP value over sum_k c_k |kk> states and its coefficients.");
  m.def(
      "rephase", [](const CMatrix& rho) { return rephase(to_density(rho)).matrix(); }, py::arg("rho"));
  m.def(
      "metrics",
      [](const CMatrix& rho) {
        py::dict out;
        for (const MetricRow& row : evaluate_metrics(to_density(rho))) out[py::str(row.name)] = row.value;
        return out;
      },
      py::arg("rho"), "Every metric the pipeline reports, on one state.");

  m.def("preset_names", &preset_names);
  m.def(
      "preset_json", [](const std::string& name) { return config_to_json(preset_config(name)).dump(); },
      py::arg("name"));
  m.def(
      "run_preset_json",
      [](const std::string& name, const std::optional<std::string>& out_dir, unsigned threads) {
        return report_text(preset_config(name), out_dir, threads);
      },
      py::arg("name"), py::arg("out_dir") = py::none(), py::arg("threads") = 0u);
  m.def(
      "run_config_json",
      [](const std::string& text, const std::optional<std::string>& out_dir, unsigned threads) {
        json j;
        try {
          j = json::parse(text);
        } catch (const json::exception& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
        return report_text(config_from_json(j), out_dir, threads);
      },
      py::arg("text"), py::arg("out_dir") = py::none(), py::arg("threads") = 0u);
  m.def(
      "reconstruct_csv",
      [](const std::string& csv, int dim, const std::string& efficiency) {
        std::istringstream in(csv);
        const CountsRecord counts = read_counts_csv(in);
        const ReconstructionResult r = mle_reconstruct(counts, standard_settings(dim), efficiency_from_name(efficiency, dim));
        return py::make_tuple(r.rho.matrix(), r.log_likelihood, r.converged);
      },
      py::arg("csv"), py::arg("dim") = 4, py::arg("efficiency") = "ideal",
      "Maximum-likelihood state from a counts table; returns (rho, log_likelihood, converged).");
}
