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

// dopf: command-line front end for the distributed OPF toolkit.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
// 3 infeasible.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dopf/acopf.hpp"
#include "dopf/acpf.hpp"
#include "dopf/admm.hpp"
#include "dopf/caseio.hpp"
#include "dopf/error.hpp"
#include "dopf/harness.hpp"
#include "dopf/tighten.hpp"
#include "dopf/wcv.hpp"

namespace {

using namespace dopf;

enum Exit : int { kOk = 0, kUsage = 1, kNumerical = 2, kInfeasible = 3 };

struct Options {
  std::string case_path;
  std::string partition_path;
  int regions = 3;
  double eps_pri = 1e-4;
  double alpha = 1000.0;
  std::optional<double> budget;
  double load_factor = 0.5;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string lambda_path;
  std::vector<double> eps_grid;
  std::vector<double> budgets;
  int max_iterations = 2000;
  int starts = 3;
  int threads = 1;
  bool strict_peer = false;
  bool nominal = false;
};

std::filesystem::path out_file(const Options& o, const std::string& name) {
  std::filesystem::create_directories(o.out);
  return std::filesystem::path(o.out) / name;
}

void save(const Options& o, const std::string& name, const std::string& contents) {
  const auto path = out_file(o, name);
  write_text_file(path.string(), contents);
  std::cout << "wrote " << path.string() << "\n";
}

AdmmConfig admm_config(const Options& o) {
  AdmmConfig c;
  c.alpha = o.alpha;
  c.eps_pri = o.eps_pri;
  c.max_iterations = o.max_iterations;
  c.strict_peer = o.strict_peer;
  return c;
}

WcvConfig wcv_config(const Options& o) {
  WcvConfig c;
  c.eps_pri = o.eps_pri;
  c.load_factor = o.load_factor;
  c.budget = o.budget;
  c.starts = o.starts;
  c.seed = o.seed;
  return c;
}

TighteningConfig tightening_config(const Options& o) {
  TighteningConfig c;
  c.eps_pri = o.eps_pri;
  c.load_factor = o.load_factor;
  c.budget = o.budget;
  c.worst_case = wcv_config(o);
  c.on_pass = [](int k, const TighteningPass& p) {
    std::cerr << "pass " << k + 1 << ": solved " << p.solved << ", max_w " << format_double(p.max_w) << ", step "
              << format_double(p.step) << ", " << format_double(p.seconds) << " s\n";
  };
  return c;
}

Provenance provenance(const Options& o, const Experiment& e) {
  return {e.case_name, static_cast<int>(e.decomposition.region_count()), o.alpha, o.eps_pri, o.budget,
          o.load_factor, o.seed};
}

Experiment experiment(const Options& o) {
  Experiment e = load_experiment(o.case_path, o.partition_path, o.regions);
  for (const auto& w : e.warnings) std::cerr << "warning: " << w << "\n";
  return e;
}

std::optional<TightenedBounds> read_lambda(const Options& o, const Network& net) {
  if (o.lambda_path.empty()) return std::nullopt;
  return parse_lambda_table(net, read_text_file(o.lambda_path));
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 6; ++k) g.push_back(std::pow(10.0, -6.0 + 0.5 * k));
  return g;
}

int exit_for(nlp::SolveStatus s) {
  if (s == nlp::SolveStatus::Optimal) return kOk;
  return s == nlp::SolveStatus::Infeasible ? kInfeasible : kNumerical;
}

// ---------------------------------------------------------------------------

int cmd_solve_opf(const Options& o) {
  const Experiment e = experiment(o);
  const auto lambda = read_lambda(o, *e.network);
  const OpfResult r = solve_opf(build_opf(e.network, lambda ? &*lambda : nullptr));
  std::cout << "status " << to_string(r.solution.status) << "\n";
  if (!r.optimal()) return exit_for(r.solution.status);
  std::cout << "objective " << format_double(r.solution.objective) << "\n";
  save(o, "dispatch.csv", write_report(dispatch_table(*e.network, r.dispatch, provenance(o, e))));
  return kOk;
}

int cmd_run_admm(const Options& o) {
  const Experiment e = experiment(o);
  const auto lambda = read_lambda(o, *e.network);
  std::optional<LoadAssignment> loads;
  if (!o.nominal) loads = sample_loads(LoadEnvelope::from_network(*e.network, o.load_factor), o.seed);
  const AdmmResult r = run_admm(e.decomposition, admm_config(o), loads ? &*loads : nullptr, lambda ? &*lambda : nullptr);
  std::cout << "status " << to_string(r.status) << "\niterations " << r.iterations << "\n";
  const Provenance p = provenance(o, e);
  save(o, "trace.csv", write_report(trace_table(r, p)));
  if (!r.converged()) return kNumerical;
  std::cout << "objective " << format_double(r.dispatch.objective) << "\n";
  save(o, "dispatch.csv", write_report(dispatch_table(*e.network, r.dispatch, p)));
  const PfSolution pf = run_pf(*e.network, r.dispatch, loads ? *loads : LoadAssignment::nominal(*e.network));
  std::cout << "power_flow " << to_string(pf.status) << "\n";
  if (!pf.converged()) return kNumerical;
  const ViolationMetrics m = measure_violations(*e.network, pf);
  std::cout << "violations " << m.count << "\naverage_percent " << format_double(m.average_percent) << "\n";
  return kOk;
}

int cmd_worst_case(const Options& o) {
  const Experiment e = experiment(o);
  const auto lambda = read_lambda(o, *e.network);
  const WcvProblem problem(e.decomposition, wcv_config(o), lambda ? &*lambda : nullptr);
  const ViolationReport report = problem.solve();
  save(o, "worst_case.csv", write_report(report_table(*e.network, report, provenance(o, e))));
  if (report.empty_set) {
    std::cout << "no distributed operating point exists\n";
    return kInfeasible;
  }
  std::cout << "max_w " << format_double(report.max_w()) << "\n";
  return kOk;
}

int cmd_tighten(const Options& o) {
  const Experiment e = experiment(o);
  const TighteningResult r = tighten_bounds(e.decomposition, tightening_config(o));
  std::cout << "status " << to_string(r.status) << "\npasses " << r.passes.size() << "\n";
  if (!r.reason.empty()) std::cout << "reason " << r.reason << "\n";
  const Provenance p = provenance(o, e);
  std::vector<BoundId> bounds;
  for (const auto& entry : r.last_report.entries) bounds.push_back(entry.bound);
  save(o, "lambda.csv", write_report(lambda_table(*e.network, r.lambda, bounds, p)));
  save(o, "worst_case.csv", write_report(report_table(*e.network, r.last_report, p)));
  Table passes = make_table({"pass", "solved", "max_w", "step", "seconds"});
  for (std::size_t k = 0; k < r.passes.size(); ++k) {
    const auto& ps = r.passes[k];
    auto row = provenance_cells(p);
    row.insert(row.end(), {static_cast<std::int64_t>(k + 1), static_cast<std::int64_t>(ps.solved), ps.max_w,
                           ps.step, ps.seconds});
    passes.add_row(std::move(row));
  }
  save(o, "passes.csv", write_report(passes));
  if (r.needs_certification()) {
    std::cout << r.unknown.size() << " bounds unsolved; run certify on the tightening\n";
  }
  if (r.tightened_objective) std::cout << "tightened_objective " << format_double(*r.tightened_objective) << "\n";
  switch (r.status) {
    case TighteningStatus::Completed:
      return kOk;
    case TighteningStatus::Failed:
      return kInfeasible;
    case TighteningStatus::OuterIterationLimit:
      return kNumerical;
  }
  return kNumerical;
}

int cmd_certify(const Options& o) {
  const Experiment e = experiment(o);
  const TightenedBounds lambda = read_lambda(o, *e.network).value_or(TightenedBounds::zero(*e.network));
  CertifyConfig c;
  c.admm = admm_config(o);
  c.load_factor = o.load_factor;
  c.trials = o.trials;
  c.seed = o.seed;
  c.threads = o.threads;
  const CertificationReport r = certify(e.decomposition, lambda, c);
  save(o, "certification.csv", write_report(certification_table(r, provenance(o, e))));
  std::cout << "failures " << r.failures << "\nmedian_count " << format_double(r.median_count)
            << "\nmedian_percent " << format_double(r.median_percent) << "\nmax_percent "
            << format_double(r.max_percent) << "\nmedian_iterations " << format_double(r.median_iterations) << "\n";
  return r.failures == o.trials ? kNumerical : kOk;
}

ExperimentPlan plan_for(const Options& o) {
  ExperimentPlan plan;
  plan.eps_grid = o.eps_grid.empty() ? default_grid() : o.eps_grid;
  plan.budgets = o.budgets;
  plan.load_factor = o.load_factor;
  plan.trials = o.trials;
  plan.seed = o.seed;
  plan.admm = admm_config(o);
  plan.tightening = tightening_config(o);
  plan.threads = o.threads;
  return plan;
}

int cmd_sweep_tolerance(const Options& o) {
  const Experiment e = experiment(o);
  const ToleranceSweep s = sweep_tolerance(e, plan_for(o));
  for (const auto& row : s.rows) {
    std::cout << "eps " << format_double(row.eps) << " runs " << row.runs << " failures " << row.failures
              << " median_iterations " << format_double(median(row.iterations)) << " median_count "
              << format_double(median(row.violation_count)) << "\n";
  }
  save(o, "tolerance.csv", write_report(s.table));
  save(o, "tolerance.dat", write_plot_data(s.plot));
  return kOk;
}

int cmd_sweep_cost(const Options& o) {
  const Experiment e = experiment(o);
  const CostSweep s = sweep_cost(e, plan_for(o));
  std::cout << "base_objective " << format_double(s.base_objective) << "\n";
  for (const auto& pt : s.points) {
    std::cout << "eps " << format_double(pt.eps) << " budget " << format_double(pt.budget) << " "
              << to_string(pt.status) << " gap " << (pt.gap ? format_double(*pt.gap) : "infeasible") << "\n";
  }
  save(o, "cost.csv", write_report(s.table));
  save(o, "cost.dat", write_plot_data(s.plot));
  return kOk;
}

int cmd_histogram(const Options& o) {
  const Experiment e = experiment(o);
  const Histogram h = mismatch_histogram(e, o.eps_pri, plan_for(o));
  std::cout << "mismatches " << h.total << "\nmax " << format_double(h.max_mismatch) << "\n";
  save(o, "histogram.csv", write_report(histogram_table(h, provenance(o, e))));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed AC OPF with bound tightening"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file; flags given on the command line win");

  Options o;
  app.add_option("--case", o.case_path, "MATPOWER case file")->check(CLI::ExistingFile);
  app.add_option("--partition", o.partition_path, "bus,region file; omit for the built-in partition")
      ->check(CLI::ExistingFile);
  app.add_option("--regions", o.regions, "region count of the built-in partition")->check(CLI::PositiveNumber);
  app.add_option("--eps-pri", o.eps_pri, "primal tolerance")->check(CLI::PositiveNumber);
  app.add_option("--alpha", o.alpha, "ADMM penalty")->check(CLI::PositiveNumber);
  app.add_option("--budget", o.budget, "mismatch budget in (0, 1]")->check(CLI::Range(0.0, 1.0));
  app.add_option("--load-factor", o.load_factor, "relative load range r")->check(CLI::Range(0.0, 1.0));
  app.add_option("--trials", o.trials, "load samples")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--lambda", o.lambda_path, "tightening table written by tighten")->check(CLI::ExistingFile);
  app.add_option("--eps-grid", o.eps_grid, "tolerances to sweep")->delimiter(',');
  app.add_option("--budgets", o.budgets, "budgets to sweep")->delimiter(',');
  app.add_option("--max-iterations", o.max_iterations, "ADMM iteration limit")->check(CLI::PositiveNumber);
  app.add_option("--starts", o.starts, "starting points per worst-case problem")->check(CLI::PositiveNumber);
  app.add_option("--threads", o.threads, "worker threads for trials")->check(CLI::PositiveNumber);
  app.add_flag("--strict-peer", o.strict_peer, "stop only when every peer mismatch is within eps");
  app.add_flag("--nominal", o.nominal, "run-admm at nominal loads instead of sampled ones");

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"solve-opf", "centralized OPF", cmd_solve_opf},
      {"run-admm", "distributed OPF, then power flow and violations", cmd_run_admm},
      {"worst-case", "worst-case violation of every bound", cmd_worst_case},
      {"tighten", "iterative bound tightening", cmd_tighten},
      {"certify", "violations of a tightening over sampled loads", cmd_certify},
      {"sweep-tolerance", "iterations and violations across tolerances", cmd_sweep_tolerance},
      {"sweep-cost", "cost of tightening across tolerances and budgets", cmd_sweep_cost},
      {"histogram", "distribution of peer mismatches", cmd_histogram},
  };
  int (*chosen)(const Options&) = nullptr;
  for (const auto& c : commands) {
    app.add_subcommand(c.name, c.help)->callback([&chosen, run = c.run] { chosen = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  if (o.case_path.empty()) {
    std::cerr << "--case is required\n";
    return kUsage;
  }
  try {
    return chosen(o);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    switch (err.kind()) {
      case ErrorKind::CrossedBounds:
        return kInfeasible;
      case ErrorKind::CallbackFailure:
        return kNumerical;
      default:
        return kUsage;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kNumerical;
  }
}
