// Python bindings. Reports cross the boundary as JSON text; the package
// wrapper decodes them.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "specvol/asymptotics.hpp"
#include "specvol/errors.hpp"
#include "specvol/estimators_1d.hpp"
#include "specvol/estimators_md.hpp"
#include "specvol/io.hpp"
#include "specvol/matrix_ops.hpp"
#include "specvol/montecarlo.hpp"
#include "specvol/simulator.hpp"

namespace py = pybind11;
using namespace specvol;

namespace {

using Component = std::pair<std::vector<double>, std::vector<double>>;

ObservationSet to_observations(const std::vector<Component>& components) {
  ObservationSet obs;
  for (const auto& [t, y] : components) obs.components.push_back(ComponentObservations{t, y});
  obs.validate();
  return obs;
}

MdOptions md_options(int h_inv, int max_frequency, const std::string& noise_norm, bool debias_noise,
                     bool noise_uncertainty) {
  MdOptions o;
  o.h_inv = h_inv;
  o.max_frequency = max_frequency;
  if (noise_norm == "continuous") o.norm = NoiseNorm::continuous;
  else if (noise_norm != "empirical") throw ConfigError("noise_norm must be empirical or continuous");
  o.debias_noise = debias_noise;
  o.noise_uncertainty = noise_uncertainty;
  return o;
}

py::dict simulate(const std::string& config_json, std::optional<std::uint64_t> seed) {
  ScenarioConfig c = scenario_from_json(nlohmann::json::parse(config_json));
  if (seed) c.seed = *seed;
  Rng rng(stream_seed(c.seed, 0));
  const PathBundle paths = simulate_paths(c, rng);
  const ObservationSet obs = sample_noisy_observations(paths, c, rng);
  py::list comps;
  for (const auto& comp : obs.components)
    comps.append(py::make_tuple(py::array_t<double>(comp.times.size(), comp.times.data()),
                                py::array_t<double>(comp.values.size(), comp.values.data())));
  py::dict out;
  out["components"] = comps;
  out["integrated_covolatility"] = true_integrated_covolatility(paths, 1.0);
  return out;
}

std::string estimate_iv(const std::vector<double>& values, int h_inv, int max_frequency,
                        int pilot_frequencies, bool debias_noise, bool noise_uncertainty,
                        double level) {
  Iv1dOptions o;
  o.h_inv = h_inv;
  o.max_frequency = max_frequency;
  o.pilot_frequencies = pilot_frequencies;
  o.debias_noise = debias_noise;
  o.noise_uncertainty = noise_uncertainty;
  return report_to_json(estimate_iv_adaptive(regular_observations(values), o), level).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral estimators of integrated volatility and covolatility";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericDomainError>(m, "NumericDomainError", PyExc_ArithmeticError);

  m.def("simulate", &simulate, py::arg("config_json"), py::arg("seed") = py::none(),
        "Simulate noisy observations; returns components and the integrated covolatility at t = 1.");
  m.def("estimate_iv", &estimate_iv, py::arg("values"), py::arg("h_inv") = 0,
        py::arg("max_frequency") = 0, py::arg("pilot_frequencies") = 100,
        py::arg("debias_noise") = true, py::arg("noise_uncertainty") = true,
        py::arg("level") = 0.95, "Adaptive estimator on equidistant observations of [0, 1].");
  m.def(
      "estimate_icv",
      [](const std::vector<Component>& components, int p, int q, int h_inv, int max_frequency,
         const std::string& noise_norm, bool debias_noise, bool noise_uncertainty, double level) {
        const MdOptions o = md_options(h_inv, max_frequency, noise_norm, debias_noise, noise_uncertainty);
        return report_to_json(estimate_icv(to_observations(components), p, q, o), level).dump();
      },
      py::arg("components"), py::arg("p"), py::arg("q"), py::arg("h_inv") = 0,
      py::arg("max_frequency") = 0, py::arg("noise_norm") = "empirical",
      py::arg("debias_noise") = true, py::arg("noise_uncertainty") = true, py::arg("level") = 0.95);
  m.def(
      "estimate_lmm",
      [](const std::vector<Component>& components, int h_inv, int max_frequency,
         const std::string& noise_norm, bool debias_noise, bool noise_uncertainty) {
        const MdOptions o = md_options(h_inv, max_frequency, noise_norm, debias_noise, noise_uncertainty);
        return lmm_report_to_json(estimate_lmm(to_observations(components), o)).dump();
      },
      py::arg("components"), py::arg("h_inv") = 0, py::arg("max_frequency") = 0,
      py::arg("noise_norm") = "empirical", py::arg("debias_noise") = true,
      py::arg("noise_uncertainty") = true);
  m.def(
      "monte_carlo",
      [](const std::string& config_json, std::size_t reps, const std::vector<std::string>& estimators,
         std::optional<std::uint64_t> seed, int threads, double level, bool records) {
        const ScenarioConfig c = scenario_from_json(nlohmann::json::parse(config_json));
        McOptions o;
        o.reps = reps;
        o.master_seed = seed ? *seed : c.seed;
        o.threads = threads;
        o.level = level;
        o.estimators.clear();
        for (const auto& e : estimators) o.estimators.push_back(parse_estimator(e));
        py::gil_scoped_release release;
        return mc_report_to_json(run_monte_carlo(c, o), records).dump();
      },
      py::arg("config_json"), py::arg("reps"), py::arg("estimators"), py::arg("seed") = py::none(),
      py::arg("threads") = 1, py::arg("level") = 0.95, py::arg("records") = false);
  m.def("symmetrizer_z", &symmetrizer_z, py::arg("d"));
  m.def("avar_iv", py::overload_cast<double, double, double>(&avar_iv), py::arg("sigma"),
        py::arg("eta"), py::arg("t") = 1.0, "8 eta sigma^3 t for constant volatility.");
}
