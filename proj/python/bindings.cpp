// Copyright 2026 The dopf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dopf/acopf.hpp"
#include "dopf/acpf.hpp"
#include "dopf/admm.hpp"
#include "dopf/error.hpp"
#include "dopf/harness.hpp"
#include "dopf/tighten.hpp"
#include "dopf/wcv.hpp"

namespace py = pybind11;
using namespace dopf;

namespace {

LoadAssignment loads_for(const Experiment& exp, double load_factor, std::optional<std::uint64_t> seed) {
  if (!seed) return LoadAssignment::nominal(*exp.network);
  return sample_loads(LoadEnvelope::from_network(*exp.network, load_factor), *seed);
}

py::dict dispatch_dict(const Network& net, const Dispatch& d) {
  std::vector<double> pg_mw;
  for (double p : d.pg) pg_mw.push_back(p * net.base_mva);
  // Buses without a generator have no setpoint.
  std::vector<std::optional<double>> setpoint;
  for (double v : d.voltage_setpoint) setpoint.push_back(std::isnan(v) ? std::nullopt : std::optional<double>(v));
  py::dict out;
  out["objective"] = d.objective;
  out["pg_mw"] = pg_mw;
  out["voltage_setpoint"] = setpoint;
  return out;
}

std::optional<double> budget_or_none(double beta) { return beta < 1.0 ? std::optional<double>(beta) : std::nullopt; }

}  // namespace

PYBIND11_MODULE(_dopf, m) {
  m.doc() = "Distributed AC OPF with worst-case bound tightening.";
  py::register_exception<Error>(m, "DopfError", PyExc_RuntimeError);

  py::class_<Experiment>(m, "Experiment")
      .def_readonly("case_name", &Experiment::case_name)
      .def_property_readonly("bus_count", [](const Experiment& e) { return e.network->bus_count(); })
      .def_property_readonly("generator_count", [](const Experiment& e) { return e.network->generators.size(); })
      .def_property_readonly("region_count", [](const Experiment& e) { return e.decomposition.region_count(); })
      .def_property_readonly("boundary_variable_count",
                             [](const Experiment& e) { return e.decomposition.boundary_variable_count(); })
      .def_readonly("warnings", &Experiment::warnings);

  m.def("load_experiment", &load_experiment, py::arg("case_path"), py::arg("partition_path") = "",
        py::arg("regions") = 3, "Load a MATPOWER case and split it into regions.");

  m.def(
      "solve_opf",
      [](const Experiment& exp) {
        const OpfResult r = solve_opf(build_opf(exp.network));
        py::dict out = dispatch_dict(*exp.network, r.dispatch);
        out["optimal"] = r.optimal();
        out["objective"] = r.solution.objective;
        out["v"] = r.state.v;
        return out;
      },
      py::arg("experiment"), "Centralized OPF at nominal loads.");

  m.def(
      "run_admm",
      [](const Experiment& exp, double eps_pri, double alpha, bool strict_peer, int max_iterations,
         double load_factor, std::optional<std::uint64_t> seed) {
        AdmmConfig cfg;
        cfg.eps_pri = eps_pri;
        cfg.alpha = alpha;
        cfg.strict_peer = strict_peer;
        cfg.max_iterations = max_iterations;
        const LoadAssignment loads = loads_for(exp, load_factor, seed);
        const AdmmResult r = run_admm(exp.decomposition, cfg, &loads);
        py::dict out = dispatch_dict(*exp.network, r.dispatch);
        out["status"] = std::string(to_string(r.status));
        out["iterations"] = r.iterations;
        out["mismatches"] = r.mismatches;
        int violations = -1;
        if (r.converged()) {
          const PfSolution pf = run_pf(*exp.network, r.dispatch, loads);
          if (pf.converged()) violations = measure_violations(*exp.network, pf).count;
        }
        out["violations"] = violations;
        return out;
      },
      py::arg("experiment"), py::arg("eps_pri") = 1e-4, py::arg("alpha") = 1000.0, py::arg("strict_peer") = false,
      py::arg("max_iterations") = 2000, py::arg("load_factor") = 0.5, py::arg("seed") = py::none(),
      "Distributed OPF; with a seed, loads are sampled within the load factor. `violations` counts limit "
      "violations of the resulting power flow, or -1 when none was available.");

  m.def(
      "worst_case",
      [](const Experiment& exp, double eps_pri, double load_factor, double budget) {
        WcvConfig cfg;
        cfg.eps_pri = eps_pri;
        cfg.load_factor = load_factor;
        cfg.budget = budget_or_none(budget);
        const ViolationReport r = WcvProblem(exp.decomposition, cfg).solve();
        py::list out;
        for (const auto& e : r.entries) {
          out.append(py::make_tuple(bound_name(*exp.network, e.bound), e.w, std::string(to_string(e.status))));
        }
        return out;
      },
      py::arg("experiment"), py::arg("eps_pri") = 1e-2, py::arg("load_factor") = 0.5, py::arg("budget") = 1.0,
      "Worst-case violation of every limit as (bound, w, status) tuples.");

  m.def(
      "tighten",
      [](const Experiment& exp, double eps_pri, double load_factor, double budget, int max_outer_iterations) {
        TighteningConfig cfg;
        cfg.eps_pri = eps_pri;
        cfg.load_factor = load_factor;
        cfg.budget = budget_or_none(budget);
        cfg.max_outer_iterations = max_outer_iterations;
        const TighteningResult r = tighten_bounds(exp.decomposition, cfg);
        py::dict lambda;
        for (const auto& b : WcvProblem(exp.decomposition, WcvConfig{}).bounds()) {
          const double l = lambda_entry(r.lambda, b);
          if (l > 0.0) lambda[py::str(bound_name(*exp.network, b))] = l;
        }
        py::dict out;
        out["status"] = std::string(to_string(r.status));
        out["passes"] = r.passes.size();
        out["lambda"] = lambda;
        out["tightened_objective"] = r.tightened_objective;
        out["reason"] = r.reason;
        return out;
      },
      py::arg("experiment"), py::arg("eps_pri") = 1e-2, py::arg("load_factor") = 0.5, py::arg("budget") = 1.0,
      py::arg("max_outer_iterations") = 20, "Tighten limits until the worst cases settle; nonzero tightenings only.");

  m.def(
      "sweep_tolerance",
      [](const Experiment& exp, std::vector<double> grid, int trials, std::uint64_t seed, double load_factor) {
        ExperimentPlan plan;
        plan.eps_grid = std::move(grid);
        plan.trials = trials;
        plan.seed = seed;
        plan.load_factor = load_factor;
        return write_report(sweep_tolerance(exp, plan).table);
      },
      py::arg("experiment"), py::arg("eps_grid"), py::arg("trials") = 10, py::arg("seed") = 1,
      py::arg("load_factor") = 0.5, "Tolerance sweep; returns the CSV table.");

  m.def("update_lambda", &update_lambda, py::arg("previous"), py::arg("w"));
  m.def("median", &median, py::arg("values"));
  m.def("percentile", &percentile, py::arg("values"), py::arg("p"));
}
