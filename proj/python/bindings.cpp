// Python bindings for the fedpd simulator.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpd/algorithms.hpp"
#include "fedpd/config.hpp"
#include "fedpd/data.hpp"
#include "fedpd/metrics.hpp"
#include "fedpd/theory.hpp"
#include "fedpd/trace_io.hpp"

namespace py = pybind11;
using namespace fedpd;

namespace {

py::dict trace_columns(const Trace& trace) {
  std::vector<std::size_t> round;
  std::vector<std::uint64_t> rc, lc, as;
  std::vector<double> gap, consensus, al;
  std::vector<bool> diverged;
  for (const TraceRow& r : trace.rows) {
    round.push_back(r.round);
    rc.push_back(r.comm_rounds_cum);
    lc.push_back(r.local_iters_cum);
    as.push_back(r.samples_cum);
    gap.push_back(r.gap);
    consensus.push_back(r.consensus_err);
    al.push_back(r.al_mean);
    diverged.push_back(r.diverged);
  }
  py::dict d;
  d["round"] = round;
  d["comm_rounds_cum"] = rc;
  d["local_iters_cum"] = lc;
  d["samples_cum"] = as;
  d["gap"] = gap;
  d["consensus_err"] = consensus;
  d["al_mean"] = al;
  d["diverged"] = diverged;
  return d;
}

// Runs a JSON experiment config; returns (trace columns, summary JSON text).
py::tuple run_json(const std::string& text, std::optional<unsigned> threads) {
  ExperimentConfig cfg = parse_config(nlohmann::json::parse(text));
  if (threads) cfg.run.threads = *threads;
  const Problem problem = build_problem(cfg.problem);
  Trace trace;
  {
    py::gil_scoped_release release;
    trace = run(problem, cfg.run);
  }
  const nlohmann::json summary = summarize(trace, to_json(cfg, &problem));
  return py::make_tuple(trace_columns(trace), summary.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated primal-dual optimization simulator";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<Problem>(m, "Problem")
      .def_property_readonly("num_agents", &Problem::num_agents)
      .def_property_readonly("dim", &Problem::dim)
      .def_property_readonly("lipschitz", &Problem::lipschitz)
      .def_property_readonly("total_samples", &Problem::total_samples)
      .def("loss", &Problem::loss, py::arg("agent"), py::arg("x"))
      .def("grad", &Problem::grad, py::arg("agent"), py::arg("x"))
      .def("global_loss", &Problem::global_loss, py::arg("x"))
      .def("stationarity_gap", [](const Problem& p, const ModelVec& x) { return stationarity_gap(p, x); },
           py::arg("x"));

  m.def(
      "weak_noniid",
      [](std::size_t agents, std::size_t samples, std::size_t dim, std::uint64_t seed) {
        return gen_weak_noniid(agents, samples, dim, seed);
      },
      py::arg("agents"), py::arg("samples_per_agent"), py::arg("dim"), py::arg("seed") = 0);
  m.def(
      "strong_noniid",
      [](std::size_t agents, std::size_t samples, std::size_t dim, double noise, std::uint64_t seed) {
        return gen_strong_noniid(agents, samples, dim, noise, seed);
      },
      py::arg("agents"), py::arg("samples_per_agent"), py::arg("dim"), py::arg("noise_halfwidth") = 1.0,
      py::arg("seed") = 0);
  m.def("quadratic_pair", &Problem::quadratic_pair, py::arg("dim") = 1);

  m.def("run_json", &run_json, py::arg("config"), py::arg("threads") = py::none(),
        "Run a JSON experiment config; returns (trace columns, summary JSON)");

  m.def(
      "divergence_factor", [](double eta, std::size_t Q) { return theory::divergence_factor(eta, Q).value; },
      py::arg("eta"), py::arg("Q"));
  m.def(
      "select_skip_probability",
      [](double eps, double delta, double eta, double lipschitz) {
        const SkipChoice s = select_skip_probability(eps, delta, eta, lipschitz);
        py::dict d;
        d["p"] = s.p;
        d["regime"] = s.regime == SkipRegime::Linear ? "linear" : "log";
        d["c3"] = s.c3;
        d["threshold"] = s.threshold;
        return d;
      },
      py::arg("eps"), py::arg("delta"), py::arg("eta"), py::arg("lipschitz"));
  m.def("trace_header", [] { return std::string(kTraceHeader); });
}
