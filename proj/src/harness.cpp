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

#include "dopf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "dopf/error.hpp"
#include "parallel.hpp"

namespace dopf {

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

constexpr int kBandStep = 5;  // percentile bands every 5%

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace

Experiment make_experiment(std::string case_name, const RawCase& raw, const PartitionSpec& partition) {
  Experiment e;
  e.case_name = std::move(case_name);
  e.network = std::make_shared<const Network>(to_per_unit(raw));
  e.decomposition = decompose(e.network, partition);
  e.warnings = partition.warnings;
  return e;
}

Experiment load_experiment(const std::string& case_path, const std::string& partition_path, int regions) {
  const RawCase raw = load_case(case_path);
  const PartitionSpec spec =
      partition_path.empty() ? fallback_partition(raw, regions) : load_partition(partition_path, raw);
  return make_experiment(raw.name.empty() ? stem(case_path) : raw.name, raw, spec);
}

std::vector<std::string> provenance_columns() {
  return {"case", "regions", "alpha", "eps_pri", "budget", "load_factor", "seed"};
}

std::vector<Cell> provenance_cells(const Provenance& p) {
  return {p.case_name,
          static_cast<std::int64_t>(p.regions),
          p.alpha,
          p.eps,
          p.budget ? Cell{*p.budget} : Cell{std::string{}},
          p.load_factor,
          static_cast<std::int64_t>(p.seed)};
}

Table make_table(std::vector<std::string> more) {
  Table t;
  t.columns = provenance_columns();
  t.columns.insert(t.columns.end(), more.begin(), more.end());
  return t;
}

namespace {

Provenance provenance(const Experiment& exp, const ExperimentPlan& plan, double eps, std::optional<double> budget) {
  return {exp.case_name, static_cast<int>(exp.decomposition.region_count()), plan.admm.alpha, eps, budget,
          plan.load_factor, plan.seed};
}

std::vector<Cell> row_with(std::vector<Cell> head, std::initializer_list<Cell> tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

// ---------------------------------------------------------------------------

ToleranceSweep sweep_tolerance(const Experiment& exp, const ExperimentPlan& plan) {
  if (plan.eps_grid.empty()) throw Error(ErrorKind::InvalidArgument, "tolerance grid is empty");
  if (plan.trials < 1) throw Error(ErrorKind::InvalidArgument, "need at least one trial");
  const Network& net = *exp.network;
  std::vector<double> grid = plan.eps_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  AdmmConfig cfg = plan.admm;
  cfg.eps_pri = grid.back();
  const LoadEnvelope env = LoadEnvelope::from_network(net, plan.load_factor);

  struct TrialPoint {
    bool ok = false;
    int iterations = 0;
    int count = 0;
    double percent = 0.0;
  };
  std::vector<std::vector<TrialPoint>> results(at(plan.trials), std::vector<TrialPoint>(grid.size()));
  detail::parallel_for(plan.trials, plan.threads, [&](int t) {
    const LoadAssignment loads = sample_loads(env, derive_seed(plan.seed, static_cast<std::uint64_t>(t)));
    const AdmmResult run = run_admm(exp.decomposition, cfg, &loads, nullptr, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Checkpoint& cp = run.checkpoints[g];
      if (!cp.reached) continue;
      const PfSolution pf = run_pf(net, cp.dispatch, loads);
      if (!pf.converged()) continue;
      const ViolationMetrics m = measure_violations(net, pf);
      results[at(t)][g] = {true, cp.iterations, m.count, m.average_percent};
    }
  });

  ToleranceSweep out;
  out.table = make_table({"trials", "failures", "iterations_p5", "iterations_p50", "iterations_p95",
                          "percent_violation_p5", "percent_violation_p50", "percent_violation_p95",
                          "violation_count_p50"});
  for (std::size_t g = 0; g < grid.size(); ++g) {
    ToleranceRow row;
    row.eps = grid[g];
    for (int t = 0; t < plan.trials; ++t) {
      const TrialPoint& p = results[at(t)][g];
      if (!p.ok) {
        ++row.failures;
        continue;
      }
      ++row.runs;
      row.iterations.push_back(p.iterations);
      row.violation_count.push_back(p.count);
      row.violation_percent.push_back(p.percent);
    }
    out.table.add_row(row_with(provenance_cells(provenance(exp, plan, row.eps, std::nullopt)),
                               {static_cast<std::int64_t>(plan.trials), static_cast<std::int64_t>(row.failures),
                                percentile(row.iterations, 5), percentile(row.iterations, 50),
                                percentile(row.iterations, 95), percentile(row.violation_percent, 5),
                                percentile(row.violation_percent, 50), percentile(row.violation_percent, 95),
                                median(row.violation_count)}));
    out.rows.push_back(std::move(row));
  }
  // Rows ascending in eps read more naturally in plots.
  std::reverse(out.rows.begin(), out.rows.end());
  std::reverse(out.table.rows.begin(), out.table.rows.end());
  for (int p = kBandStep; p < 100; p += kBandStep) {
    PlotSeries it{"iterations_p" + std::to_string(p), {}, {}};
    PlotSeries pv{"percent_violation_p" + std::to_string(p), {}, {}};
    for (const auto& row : out.rows) {
      it.x.push_back(row.eps);
      it.y.push_back(percentile(row.iterations, p));
      pv.x.push_back(row.eps);
      pv.y.push_back(percentile(row.violation_percent, p));
    }
    out.plot.push_back(std::move(it));
    out.plot.push_back(std::move(pv));
  }
  return out;
}

// ---------------------------------------------------------------------------

CostSweep sweep_cost(const Experiment& exp, const ExperimentPlan& plan) {
  if (plan.eps_grid.empty()) throw Error(ErrorKind::InvalidArgument, "tolerance grid is empty");
  CostSweep out;
  const OpfResult base = solve_opf(build_opf(exp.network), plan.tightening.opf_solver);
  if (!base.optimal()) throw Error(ErrorKind::InvalidArgument, "the untightened OPF has no solution");
  out.base_objective = base.solution.objective;
  std::vector<double> budgets = plan.budgets.empty() ? std::vector<double>{1.0} : plan.budgets;

  out.table = make_table({"status", "cost_gap", "outer_iterations", "seconds"});
  for (double beta : budgets) {
    PlotSeries feasible{"gap_beta_" + format_double(beta), {}, {}};
    PlotSeries failed{"infeasible_beta_" + format_double(beta), {}, {}};
    for (double eps : plan.eps_grid) {
      TighteningConfig cfg = plan.tightening;
      cfg.eps_pri = eps;
      cfg.load_factor = plan.load_factor;
      cfg.budget = beta < 1.0 ? std::optional<double>(beta) : std::nullopt;
      const TighteningResult r = tighten_bounds(exp.decomposition, cfg);
      CostPoint pt;
      pt.eps = eps;
      pt.budget = beta;
      pt.status = r.status;
      pt.outer_iterations = static_cast<int>(r.passes.size());
      pt.seconds = r.seconds;
      if (r.completed() && r.tightened_objective) pt.gap = cost_gap(*r.tightened_objective, out.base_objective);
      out.table.add_row(row_with(provenance_cells(provenance(exp, plan, eps, beta)),
                                 {std::string(to_string(r.status)),
                                  pt.gap ? Cell{*pt.gap} : Cell{std::string("infeasible")},
                                  static_cast<std::int64_t>(pt.outer_iterations), pt.seconds}));
      if (pt.gap) {
        feasible.x.push_back(eps);
        feasible.y.push_back(100.0 * *pt.gap);
      } else {
        failed.x.push_back(eps);
        failed.y.push_back(0.0);
      }
      out.points.push_back(pt);
    }
    out.plot.push_back(std::move(feasible));
    out.plot.push_back(std::move(failed));
  }
  return out;
}

// ---------------------------------------------------------------------------

IterationReduction iteration_reduction(const Experiment& exp, double eps_orig, double eps_tight,
                                       const TightenedBounds& tightening, const ExperimentPlan& plan) {
  if (plan.trials < 1) throw Error(ErrorKind::InvalidArgument, "need at least one trial");
  const LoadEnvelope env = LoadEnvelope::from_network(*exp.network, plan.load_factor);
  std::vector<int> orig(at(plan.trials), -1), tight(at(plan.trials), -1);
  detail::parallel_for(plan.trials, plan.threads, [&](int t) {
    const LoadAssignment loads = sample_loads(env, derive_seed(plan.seed, static_cast<std::uint64_t>(t)));
    AdmmConfig cfg = plan.admm;
    cfg.eps_pri = eps_orig;
    const AdmmResult a = run_admm(exp.decomposition, cfg, &loads);
    if (a.converged()) orig[at(t)] = a.iterations;
    cfg.eps_pri = eps_tight;
    const AdmmResult b = run_admm(exp.decomposition, cfg, &loads, &tightening);
    if (b.converged()) tight[at(t)] = b.iterations;
  });
  IterationReduction out;
  std::vector<double> a, b;
  for (int t = 0; t < plan.trials; ++t) {
    if (orig[at(t)] < 0 || tight[at(t)] < 0) {
      ++out.failures;
      continue;
    }
    a.push_back(orig[at(t)]);
    b.push_back(tight[at(t)]);
  }
  out.median_original = median(a);
  out.median_tightened = median(b);
  out.reduction = (out.median_original - out.median_tightened) / out.median_original;
  out.table = make_table({"eps_orig", "eps_tight", "trials", "failures", "median_iterations_orig",
                          "median_iterations_tight", "reduction"});
  out.table.add_row(row_with(provenance_cells(provenance(exp, plan, eps_tight, plan.tightening.budget)),
                             {eps_orig, eps_tight, static_cast<std::int64_t>(plan.trials),
                              static_cast<std::int64_t>(out.failures), out.median_original, out.median_tightened,
                              out.reduction}));
  return out;
}

// ---------------------------------------------------------------------------

Histogram log_histogram(const std::vector<double>& values, double lowest, int per_decade) {
  if (!(lowest > 0.0) || per_decade < 1) throw Error(ErrorKind::InvalidArgument, "bad histogram layout");
  Histogram h;
  h.total = static_cast<int>(values.size());
  for (double v : values) h.max_mismatch = std::max(h.max_mismatch, std::abs(v));
  const double step = 1.0 / per_decade;
  const double top = std::max(h.max_mismatch, lowest);
  for (double e = std::log10(lowest);; e += step) {
    h.edges.push_back(std::pow(10.0, e));
    if (h.edges.back() > top) break;
  }
  h.counts.assign(h.edges.size() - 1, 0);
  for (double raw : values) {
    const double v = std::abs(raw);
    if (v < h.edges.front()) {
      ++h.below;
      continue;
    }
    auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
    const auto bin = static_cast<std::size_t>(std::distance(h.edges.begin(), it)) - 1;
    ++h.counts[std::min(bin, h.counts.size() - 1)];
  }
  return h;
}

Histogram mismatch_histogram(const Experiment& exp, double eps, const ExperimentPlan& plan) {
  const LoadEnvelope env = LoadEnvelope::from_network(*exp.network, plan.load_factor);
  const LoadAssignment loads = sample_loads(env, derive_seed(plan.seed, 0));
  AdmmConfig cfg = plan.admm;
  cfg.eps_pri = eps;
  const AdmmResult r = run_admm(exp.decomposition, cfg, &loads);
  return log_histogram(r.mismatches);
}

// ---------------------------------------------------------------------------

Table trace_table(const AdmmResult& r, const Provenance& p) {
  Table t = make_table({"iter", "primal_inf", "primal_two", "dual_two", "objective"});
  for (const auto& row : r.trace) {
    t.add_row(row_with(provenance_cells(p), {static_cast<std::int64_t>(row.iteration), row.primal_inf,
                                              row.primal_two, row.dual_two, row.objective}));
  }
  return t;
}

Table report_table(const Network& net, const ViolationReport& r, const Provenance& p) {
  Table t = make_table({"bound", "family", "element", "w", "status"});
  for (const auto& e : r.entries) {
    const int id = e.bound.family == LimitFamily::Flow ? e.bound.element + 1 : net.buses[at(e.bound.element)].id;
    t.add_row(row_with(provenance_cells(p), {bound_name(net, e.bound), std::string(to_string(e.bound.family)),
                                              static_cast<std::int64_t>(id), e.w, std::string(to_string(e.status))}));
  }
  return t;
}

Table lambda_table(const Network& net, const TightenedBounds& lambda, const std::vector<BoundId>& bounds,
                   const Provenance& p) {
  Table t = make_table({"bound", "family", "element", "lambda"});
  for (const auto& b : bounds) {
    const int id = b.family == LimitFamily::Flow ? b.element + 1 : net.buses[at(b.element)].id;
    t.add_row(row_with(provenance_cells(p), {bound_name(net, b), std::string(to_string(b.family)),
                                              static_cast<std::int64_t>(id), lambda_entry(lambda, b)}));
  }
  return t;
}

Table certification_table(const CertificationReport& r, const Provenance& p) {
  Table t = make_table({"trial", "trial_seed", "admm_status", "pf_status", "iterations", "violations",
                        "average_percent", "objective"});
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto& tr = r.trials[i];
    t.add_row(row_with(provenance_cells(p),
                       {static_cast<std::int64_t>(i), std::to_string(tr.seed), std::string(to_string(tr.admm)),
                        std::string(to_string(tr.pf)), static_cast<std::int64_t>(tr.iterations),
                        static_cast<std::int64_t>(tr.metrics.count), tr.metrics.average_percent, tr.objective}));
  }
  return t;
}

Table dispatch_table(const Network& net, const Dispatch& d, const Provenance& p) {
  Table t = make_table({"generator", "bus", "pg_mw", "voltage_setpoint"});
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const int bus = net.generators[g].bus;
    t.add_row(row_with(provenance_cells(p),
                       {static_cast<std::int64_t>(g + 1), static_cast<std::int64_t>(net.buses[at(bus)].id),
                        d.pg[g] * net.base_mva, d.voltage_setpoint[at(bus)]}));
  }
  return t;
}

Table histogram_table(const Histogram& h, const Provenance& p) {
  Table t = make_table({"lower", "upper", "count"});
  t.add_row(row_with(provenance_cells(p), {0.0, h.edges.empty() ? 0.0 : h.edges.front(),
                                            static_cast<std::int64_t>(h.below)}));
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    t.add_row(row_with(provenance_cells(p), {h.edges[i], h.edges[i + 1], static_cast<std::int64_t>(h.counts[i])}));
  }
  return t;
}

TightenedBounds parse_lambda_table(const Network& net, std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorKind::MalformedTable, "tightening table is empty");
  const auto column = [&](const std::string& name) {
    const auto& head = rows.front();
    const auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) throw Error(ErrorKind::MalformedTable, "tightening table lacks column " + name);
    return static_cast<std::size_t>(std::distance(head.begin(), it));
  };
  const std::size_t family_col = column("family"), element_col = column("element"), value_col = column("lambda");
  constexpr LimitFamily families[] = {LimitFamily::VoltageUpper, LimitFamily::VoltageLower, LimitFamily::ReactiveUpper,
                                      LimitFamily::ReactiveLower, LimitFamily::Flow};
  TightenedBounds lambda = TightenedBounds::zero(net);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() <= std::max({family_col, element_col, value_col})) {
      throw Error(ErrorKind::MalformedTable, "short row " + std::to_string(r + 1) + " in tightening table");
    }
    const auto* family = std::find_if(std::begin(families), std::end(families),
                                      [&](LimitFamily f) { return to_string(f) == row[family_col]; });
    if (family == std::end(families)) throw Error(ErrorKind::MalformedTable, "unknown bound family " + row[family_col]);
    int element = 0;
    double value = 0.0;
    try {
      element = std::stoi(row[element_col]);
      value = std::stod(row[value_col]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedTable, "bad number in tightening table row " + std::to_string(r + 1));
    }
    BoundId b{*family, 0};
    if (*family == LimitFamily::Flow) {
      if (element < 1 || element > static_cast<int>(net.branches.size())) {
        throw Error(ErrorKind::MalformedTable, "branch " + std::to_string(element) + " out of range");
      }
      b.element = element - 1;
    } else {
      b.element = net.bus_index(element);
    }
    if (value < 0.0) throw Error(ErrorKind::MalformedTable, "negative tightening for " + bound_name(net, b));
    lambda_entry(lambda, b) = value;
  }
  return lambda;
}

}  // namespace dopf
