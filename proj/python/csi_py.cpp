// JSON strings cross the boundary; the Python side decodes them.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "csi/analytics.hpp"
#include "csi/errors.hpp"
#include "csi/io.hpp"
#include "csi/service.hpp"
#include "csi/smm_em.hpp"
#include "csi/synth.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::string simulate_k4(std::size_t n, std::uint64_t seed) {
  const auto ds = csi::sample_dataset(csi::canonical_k4_spec(n, seed));
  std::ostringstream out;
  csi::write_trajectories(out, ds.data);
  return out.str();
}

std::vector<csi::ClusterId> true_labels_k4(std::size_t n, std::uint64_t seed) {
  return csi::sample_dataset(csi::canonical_k4_spec(n, seed)).labels;
}

std::string fit_jsonl(const std::string& jsonl, std::size_t K, int restarts, int max_iter, std::uint64_t seed) {
  std::istringstream in(jsonl);
  const auto data = csi::read_trajectories(in);
  csi::EmConfig cfg;
  cfg.K = K;
  cfg.restarts = restarts;
  cfg.max_iter = max_iter;
  cfg.seed = seed;
  const auto r = csi::fit(data, cfg);
  csi::SavedModel m;
  m.params = r.params;
  m.meta.config = cfg;
  m.meta.objective = r.final_q;
  m.meta.seed = r.seed_used;
  m.meta.diagnosis_labels = data.diagnosis_labels;
  json out = csi::model_to_json(m);
  out["labels"] = r.membership.assignments();
  out["q_trace"] = r.q_trace;
  return out.dump();
}

// occupancy[j][d] for one cluster of a saved model
std::vector<std::vector<double>> occupancy_of(const std::string& model_json, csi::ClusterId k, int d_max) {
  const auto m = csi::model_from_json(json::parse(model_json));
  if (k >= m.params.num_clusters()) throw csi::ConfigError("cluster index out of range");
  const auto g = csi::occupancy(m.params, k, d_max);
  std::vector<std::vector<double>> out(g.num_states, std::vector<double>(static_cast<std::size_t>(d_max) + 1));
  for (csi::StateId j = 0; j < g.num_states; ++j)
    for (int d = 0; d <= d_max; ++d) out[j][static_cast<std::size_t>(d)] = g(j, d);
  return out;
}

std::vector<double> mean_los(const std::string& model_json, csi::ClusterId k) {
  const auto m = csi::model_from_json(json::parse(model_json));
  if (k >= m.params.num_clusters()) throw csi::ConfigError("cluster index out of range");
  return csi::mean_los_exact(m.params, k);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Clinical-pathway semi-Markov mixtures";

  py::register_exception<csi::ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<csi::StructuralError>(mod, "StructuralError", PyExc_ValueError);
  py::register_exception<csi::ParseError>(mod, "ParseError", PyExc_ValueError);

  mod.def("simulate_k4", &simulate_k4, py::arg("n"), py::arg("seed") = 0,
          "Canonical four-component sample as trajectory JSON lines.");
  mod.def("true_labels_k4", &true_labels_k4, py::arg("n"), py::arg("seed") = 0);
  mod.def("fit_jsonl", &fit_jsonl, py::arg("jsonl"), py::arg("K"), py::arg("restarts") = 5, py::arg("max_iter") = 50,
          py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>());
  mod.def("occupancy", &occupancy_of, py::arg("model_json"), py::arg("cluster"), py::arg("d_max"));
  mod.def("mean_los", &mean_los, py::arg("model_json"), py::arg("cluster"));

  py::class_<csi::Service>(mod, "Service")
      .def(py::init<>())
      .def(
          "handle",
          [](csi::Service& s, const std::string& method, const std::string& path, const std::string& body) {
            const auto r = s.handle(method, path, body);
            return py::make_tuple(r.status, r.body.dump());
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "")
      .def("wait_idle", &csi::Service::wait_idle, py::call_guard<py::gil_scoped_release>());
}
