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

// Acceptance run: one line per criterion with PASS or FAIL and the measured
// numbers. Exits nonzero when any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analytic_problems.hpp"
#include "dopf/acopf.hpp"
#include "dopf/acpf.hpp"
#include "dopf/admm.hpp"
#include "dopf/caseio.hpp"
#include "dopf/harness.hpp"
#include "dopf/nlp/model.hpp"
#include "dopf/nlp/solver.hpp"
#include "dopf/tighten.hpp"
#include "dopf/wcv.hpp"
#include "grid_oracle.hpp"
#include "toy_cases.hpp"
#include "toy_oracle.hpp"

using namespace dopf;
using namespace dopf::testing;

namespace {

// Objectives of the same cases from an established MATPOWER-format OPF
// implementation, solved offline.
constexpr double kCase14Reference = 8081.526257049368;
constexpr double kCase118Reference = 129660.68501164945;

constexpr double kLoadRange = 0.5;
constexpr double kTightTolerance = 1e-2;
constexpr std::uint64_t kSeed = 20240601;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Settings {
  int trials = 100;
  int reduction_trials = 100;
  int threads = 1;
  std::string out;
};

Settings settings;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const Experiment& case14() {
  static const Experiment e = load_experiment(data_path("case14.m"), "", 3);
  return e;
}

const Experiment& case118() {
  static const Experiment e = load_experiment(data_path("case118.m"), "", 3);
  return e;
}

// Tightenings are shared between criteria, keyed by case and budget.
const TighteningResult& tightening(const Experiment& exp, double beta) {
  static std::map<std::pair<std::string, double>, TighteningResult> cache;
  const auto key = std::make_pair(exp.case_name, beta);
  auto it = cache.find(key);
  if (it == cache.end()) {
    TighteningConfig cfg;
    cfg.eps_pri = kTightTolerance;
    cfg.load_factor = kLoadRange;
    if (beta < 1.0) cfg.budget = beta;
    it = cache.emplace(key, tighten_bounds(exp.decomposition, cfg)).first;
  }
  return it->second;
}

void save(const std::string& name, const Table& t) {
  if (!settings.out.empty()) write_text_file(settings.out + "/" + name, write_report(t));
}

Provenance provenance_of(const Experiment& exp, double eps, std::optional<double> beta) {
  return {exp.case_name, static_cast<int>(exp.decomposition.region_count()), AdmmConfig{}.alpha, eps, beta,
          kLoadRange, kSeed};
}

// ---------------------------------------------------------------------------

void solver_correctness(Verdict& v) {
  using namespace dopf::nlp;
  std::vector<std::pair<std::string, double>> errors;
  {
    const NlpSolution s = solve(Hs071{});
    errors.emplace_back("hs071", s.optimal() ? std::abs(s.objective - 17.014017289158) : INFINITY);
  }
  {
    const NlpSolution s = solve(Rosenbrock{});
    errors.emplace_back("rosenbrock", s.optimal() ? std::abs(s.objective) : INFINITY);
  }
  {
    // min (x - 3)^2 on [-5, 1]: optimum 4 at x = 1.
    Model m;
    const auto x = m.add_variable(-5.0, 1.0, 0.0);
    Expression f;
    f.add_square(x, 1.0).add_linear(x, -6.0).add_constant(9.0);
    m.set_objective(f);
    const NlpSolution s = solve(m);
    errors.emplace_back("box_quadratic", s.optimal() ? std::abs(s.objective - 4.0) : INFINITY);
  }
  {
    // min x + y on x^2 + y^2 <= 2: optimum -2.
    Model m;
    const auto x = m.add_variable(-kInfinity, kInfinity, 0.3);
    const auto y = m.add_variable(-kInfinity, kInfinity, 0.1);
    Expression f;
    f.add_linear(x, 1.0).add_linear(y, 1.0);
    m.set_objective(f);
    Expression disc;
    disc.add_square(x, 1.0).add_square(y, 1.0);
    m.add_constraint(disc, -kInfinity, 2.0);
    const NlpSolution s = solve(m);
    errors.emplace_back("linear_over_disc", s.optimal() ? std::abs(s.objective + 2.0) : INFINITY);
  }
  {
    // min x^2 + y^2 with x + y = 1: optimum 1/2.
    Model m;
    const auto x = m.add_variable(-kInfinity, kInfinity, 0.0);
    const auto y = m.add_variable(-kInfinity, kInfinity, 0.0);
    Expression f;
    f.add_square(x, 1.0).add_square(y, 1.0);
    m.set_objective(f);
    Expression g;
    g.add_linear(x, 1.0).add_linear(y, 1.0);
    m.add_constraint(g, 1.0, 1.0);
    const NlpSolution s = solve(m);
    errors.emplace_back("equality_quadratic", s.optimal() ? std::abs(s.objective - 0.5) : INFINITY);
  }
  {
    // min x + y on the unit circle: optimum -sqrt(2).
    Model m;
    const auto x = m.add_variable(-kInfinity, kInfinity, 0.5);
    const auto y = m.add_variable(-kInfinity, kInfinity, -0.2);
    Expression f;
    f.add_linear(x, 1.0).add_linear(y, 1.0);
    m.set_objective(f);
    Expression circle;
    circle.add_square(x, 1.0).add_square(y, 1.0);
    m.add_constraint(circle, 1.0, 1.0);
    const NlpSolution s = solve(m);
    errors.emplace_back("linear_on_circle", s.optimal() ? std::abs(s.objective + std::sqrt(2.0)) : INFINITY);
  }
  double worst = 0.0;
  for (const auto& [name, err] : errors) {
    worst = std::max(worst, err);
    v.require(err <= 1e-6, name);
  }
  v.detail << errors.size() << " problems, max objective error " << fmt(worst) << "; ";

  // Derivatives of the case14 OPF model at a perturbed flat start.
  const OpfModel m = build_opf(case14().network);
  const auto x0 = m.model().start();
  std::vector<double> x(x0.begin(), x0.end());
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (double& xi : x) xi += jitter(rng);
  std::vector<double> y(static_cast<std::size_t>(m.model().num_constraints()));
  for (double& yi : y) yi = 10.0 * jitter(rng);
  const auto check = nlp::check_derivatives(m.model(), x, y);
  const double d = std::max({check.gradient, check.jacobian, check.hessian});
  v.require(d <= 1e-5, "case14 derivative check");
  v.detail << "case14 derivative error " << fmt(d);
}

void opf_baseline(Verdict& v) {
  for (const auto& [exp, ref] : {std::pair{&case14(), kCase14Reference}, std::pair{&case118(), kCase118Reference}}) {
    const OpfResult r = solve_opf(build_opf(exp->network));
    const double rel = r.optimal() ? std::abs(r.solution.objective - ref) / ref : INFINITY;
    v.require(rel <= 1e-3, exp->case_name);
    v.detail << exp->case_name << " objective " << fmt(r.solution.objective) << " (reference " << fmt(ref)
             << ", relative error " << fmt(rel) << "); ";
  }
}

void pf_consistency(Verdict& v) {
  for (const char* name : {"case14.m", "case118.m"}) {
    const RawCase raw = load_case(data_path(name));
    const auto net = std::make_shared<const Network>(to_per_unit(raw));
    const OpfResult opf = solve_opf(build_opf(net));
    if (!opf.optimal()) {
      v.require(false, std::string(name) + " OPF");
      continue;
    }
    const LoadAssignment loads = LoadAssignment::nominal(*net);
    const PfSolution pf = run_pf(*net, opf.dispatch, loads);
    if (!pf.converged()) {
      v.require(false, std::string(name) + " power flow");
      continue;
    }
    double dv = 0.0;
    for (std::size_t i = 0; i < net->bus_count(); ++i) dv = std::max(dv, std::abs(pf.v[i] - opf.state.v[i]));
    const int count = measure_violations(*net, pf).count;
    const double balance = balance_mismatch(raw, pf.v, pf.theta, pf.pg, pf.qg, loads.pd, loads.qd);
    v.require(dv <= 1e-6 && count == 0 && balance <= 1e-6, name);
    v.detail << name << " max |dv| " << fmt(dv) << " pu, violations " << count << ", balance " << fmt(balance)
             << "; ";
  }
}

void admm_equivalence(Verdict& v) {
  const double ref = solve_opf(build_opf(case14().network)).solution.objective;
  AdmmConfig cfg;
  cfg.eps_pri = 1e-5;
  const AdmmResult three = run_admm(case14().decomposition, cfg);
  const double gap3 = std::abs(three.dispatch.objective - ref) / ref;
  v.require(three.converged() && gap3 <= 0.01, "three regions");
  v.detail << "3 regions: " << three.iterations << " iterations, relative gap " << fmt(gap3) << "; ";

  const Experiment single = load_experiment(data_path("case14.m"), "", 1);
  const AdmmResult one = run_admm(single.decomposition, cfg);
  const double gap1 = std::abs(one.dispatch.objective - ref) / ref;
  v.require(one.converged() && gap1 <= 1e-6, "single region");
  v.detail << "1 region: relative gap " << fmt(gap1);
}

void tolerance_trend(Verdict& v) {
  ExperimentPlan plan;
  for (int k = 0; k <= 6; ++k) plan.eps_grid.push_back(std::pow(10.0, -6.0 + 0.5 * k));
  plan.trials = settings.trials;
  plan.seed = kSeed;
  plan.load_factor = kLoadRange;
  plan.threads = settings.threads;
  const ToleranceSweep s = sweep_tolerance(case14(), plan);
  save("tolerance.csv", s.table);
  std::vector<double> iters, counts;
  int failures = 0;
  for (const auto& row : s.rows) {
    iters.push_back(median(row.iterations));
    counts.push_back(median(row.violation_count));
    failures += row.failures;
  }
  bool decreasing = true;
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < iters.size(); ++i) {
    decreasing = decreasing && iters[i + 1] < iters[i];
    inversions += counts[i + 1] < counts[i];
  }
  v.require(decreasing, "median iterations strictly decrease");
  v.require(counts.front() == 0.0, "no violations at the smallest tolerance");
  v.require(counts.back() > 0.0, "violations at the largest tolerance");
  v.require(inversions <= 1, "violation trend");
  v.detail << "case14, " << plan.trials << " trials, " << failures << " failed runs; eps/median iterations/median count:";
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    v.detail << " " << fmt(s.rows[i].eps) << "/" << iters[i] << "/" << counts[i];
  }
}

void update_rule(Verdict& v) {
  const bool examples =
      update_lambda(0.0, 0.5) == 0.5 && update_lambda(0.3, -0.1) == 0.3 - 0.1 && update_lambda(0.3, -0.5) == 0.0;
  v.require(examples, "update examples");
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> lam(0.0, 1.0), w(-2.0, 2.0);
  int negative = 0;
  for (int k = 0; k < 10000; ++k) negative += update_lambda(lam(rng), w(rng)) < 0.0;
  v.require(negative == 0, "nonnegativity");
  v.detail << "examples " << (examples ? "hold" : "differ") << ", " << negative << " negative of 10000";
}

// True when every solved entry of `lo` is at most the matching entry of `hi`.
int monotone_breaks(const ViolationReport& lo, const ViolationReport& hi, int& unsolved) {
  int breaks = 0;
  for (std::size_t k = 0; k < lo.entries.size(); ++k) {
    if (lo.entries[k].status != BoundStatus::Solved || hi.entries[k].status != BoundStatus::Solved) {
      ++unsolved;
      continue;
    }
    breaks += lo.entries[k].w > hi.entries[k].w + 1e-6;
  }
  return breaks;
}

double witness_error(const WcvProblem& p, const ViolationReport& r) {
  double worst = 0.0;
  for (const auto& e : r.entries) {
    if (e.status == BoundStatus::Solved) worst = std::max(worst, std::abs(p.reevaluate(e.bound, e.witness) - e.w));
  }
  return worst;
}

void worst_case_monotone(Verdict& v) {
  const TwoBusSpec spec{};
  const RawCase raw = two_bus_case(spec);
  const Decomposition toy = decompose_case(raw, split_partition(raw, {{1, 1}, {2, 2}}));
  auto config = [](double eps, std::optional<double> beta) {
    WcvConfig c;
    c.eps_pri = eps;
    c.load_factor = kLoadRange;
    c.budget = beta;
    return c;
  };
  int breaks = 0, unsolved = 0;
  double witness = 0.0, oracle = 0.0;

  // Toy: tolerance ladder, then budget ladder at the widest tolerance.
  const std::vector<double> eps_ladder{1e-3, 2e-3, 5e-3, 1e-2, 2e-2};
  std::vector<ViolationReport> reports;
  for (double eps : eps_ladder) {
    const WcvProblem p(toy, config(eps, std::nullopt));
    reports.push_back(p.solve({}, reports.empty() ? nullptr : &reports.back()));
    witness = std::max(witness, witness_error(p, reports.back()));
    if (eps >= 1e-3) {
      const WorstCase wc = p.worst_case({LimitFamily::VoltageUpper, 1});
      oracle = std::max(oracle, std::abs(wc.w - oracle_v2_upper(spec, kLoadRange, eps)));
    }
  }
  for (std::size_t i = 0; i + 1 < reports.size(); ++i) breaks += monotone_breaks(reports[i], reports[i + 1], unsolved);
  reports.clear();
  for (double beta : {0.05, 0.25, 0.5, 1.0}) {
    const WcvProblem p(toy, config(1e-2, beta));
    reports.push_back(p.solve({}, reports.empty() ? nullptr : &reports.back()));
    witness = std::max(witness, witness_error(p, reports.back()));
  }
  for (std::size_t i = 0; i + 1 < reports.size(); ++i) breaks += monotone_breaks(reports[i], reports[i + 1], unsolved);
  v.require(oracle <= 1e-4, "toy grid-search oracle");
  v.detail << "toy: oracle error " << fmt(oracle) << "; ";

  // case14: two tolerances crossed with a budget and no budget.
  const Decomposition& d = case14().decomposition;
  const WcvProblem a(d, config(5e-3, 0.1)), b(d, config(1e-2, 0.1)), c(d, config(5e-3, std::nullopt)),
      e(d, config(1e-2, std::nullopt));
  const ViolationReport ra = a.solve();
  const ViolationReport rb = b.solve({}, &ra);
  const ViolationReport rc = c.solve({}, &ra);
  const ViolationReport re = e.solve({}, &rc);
  breaks += monotone_breaks(ra, rb, unsolved) + monotone_breaks(ra, rc, unsolved) +
            monotone_breaks(rb, re, unsolved) + monotone_breaks(rc, re, unsolved);
  for (const auto& [p, r] : {std::pair{&a, &ra}, std::pair{&b, &rb}, std::pair{&c, &rc}, std::pair{&e, &re}}) {
    witness = std::max(witness, witness_error(*p, *r));
  }
  v.require(breaks == 0, "monotonicity");
  v.require(unsolved == 0, "all worst cases solved");
  v.require(witness <= 1e-6, "witness re-evaluation");
  v.detail << "case14 " << ra.entries.size() << " bounds x 4 settings; monotonicity breaks " << breaks
           << ", unsolved " << unsolved << ", max witness error " << fmt(witness);
}

void zero_violation(Verdict& v) {
  const Experiment& exp = case14();
  for (double beta : {1.0, 0.1, 0.01}) {
    const TighteningResult& t = tightening(exp, beta);
    v.detail << "beta " << beta << ": " << to_string(t.status) << " after " << t.passes.size() << " passes";
    if (!t.completed()) {
      v.detail << " (" << t.reason << "); ";
      v.require(false, "beta " + fmt(beta) + " tightening");
      continue;
    }
    CertifyConfig cc;
    cc.admm.eps_pri = kTightTolerance;
    cc.admm.strict_peer = true;
    cc.load_factor = kLoadRange;
    cc.trials = settings.trials;
    cc.seed = kSeed;
    cc.threads = settings.threads;
    const CertificationReport rep = certify(exp.decomposition, t.lambda, cc);
    save("certification_beta_" + fmt(beta) + ".csv", certification_table(rep, provenance_of(exp, kTightTolerance, beta)));
    v.detail << ", median count " << rep.median_count << ", max average percent " << fmt(rep.max_percent)
             << ", failed runs " << rep.failures << "; ";
    if (beta >= 0.1) {
      v.require(rep.failures == 0 && rep.median_count == 0.0 && rep.max_percent <= 0.01,
                "beta " + fmt(beta) + " certification");
    } else {
      v.require(rep.median_count >= 1.0, "beta " + fmt(beta) + " shows violations");
    }
  }
}

void cost_bound(Verdict& v) {
  ExperimentPlan plan;
  plan.eps_grid = {1e-3, 2.5e-3, 5e-3, 1e-2};
  plan.budgets = {1.0, 0.1};
  plan.load_factor = kLoadRange;
  plan.seed = kSeed;
  const CostSweep s = sweep_cost(case14(), plan);
  save("cost.csv", s.table);
  int completed = 0;
  double worst = 0.0;
  for (double beta : plan.budgets) {
    std::optional<double> previous;
    v.detail << "beta " << beta << ":";
    for (const auto& p : s.points) {
      if (p.budget != beta) continue;
      v.detail << " " << fmt(p.eps) << "/" << (p.gap ? fmt(100.0 * *p.gap) + "%" : std::string("infeasible"));
      if (!p.gap) continue;
      ++completed;
      worst = std::max(worst, *p.gap);
      if (previous) v.require(*p.gap >= *previous - 5e-4, "gap trend at beta " + fmt(beta));
      previous = p.gap;
    }
    v.detail << "; ";
  }
  v.require(worst <= 2e-3, "gap ceiling");
  v.require(completed > 0, "some completed point");
  v.detail << completed << " completed, max gap " << fmt(100.0 * worst) << "%";
}

void iteration_drop(Verdict& v) {
  for (const auto& [exp, floor] : {std::pair{&case14(), 0.3}, std::pair{&case118(), 0.5}}) {
    const TighteningResult& t = tightening(*exp, 0.1);
    if (!t.completed()) {
      v.require(false, exp->case_name + " tightening");
      v.detail << exp->case_name << ": tightening " << to_string(t.status) << "; ";
      continue;
    }
    ExperimentPlan plan;
    plan.trials = settings.reduction_trials;
    plan.seed = kSeed;
    plan.load_factor = kLoadRange;
    plan.threads = settings.threads;
    plan.admm.strict_peer = true;
    plan.tightening.budget = 0.1;
    const IterationReduction r = iteration_reduction(*exp, 5e-4, kTightTolerance, t.lambda, plan);
    save("reduction_" + exp->case_name + ".csv", r.table);
    v.require(r.reduction > floor, exp->case_name + " reduction");
    v.detail << exp->case_name << ": " << r.median_original << " -> " << r.median_tightened << " iterations, reduction "
             << fmt(100.0 * r.reduction) << "% (" << r.failures << " excluded); ";
  }
}

void budget_encoding(Verdict& v) {
  const RawCase raw = two_bus_case();
  const Decomposition toy = decompose_case(raw, split_partition(raw, {{1, 1}, {2, 2}}));
  double worst = 0.0;
  int unsolved = 0;
  for (double beta : {0.25, 0.5, 1.0}) {
    WcvConfig aux;
    aux.eps_pri = 1e-2;
    aux.load_factor = kLoadRange;
    aux.budget = beta;
    WcvConfig signs = aux;
    signs.encoding = BudgetEncoding::SignEnumeration;
    const WcvProblem a(toy, aux), b(toy, signs);
    for (const BoundId& bound : a.bounds()) {
      const WorstCase wa = a.worst_case(bound), wb = b.worst_case(bound);
      if (wa.status != BoundStatus::Solved || wb.status != BoundStatus::Solved) {
        ++unsolved;
        continue;
      }
      worst = std::max(worst, std::abs(wa.w - wb.w));
    }
  }
  v.require(unsolved == 0 && worst <= 1e-6, "encodings agree");
  v.detail << "max difference " << fmt(worst) << ", unsolved " << unsolved;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the distributed OPF library"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--trials", settings.trials, "Load-perturbed trials per sweep and certification");
  app.add_option("--reduction-trials", settings.reduction_trials, "Trials per iteration-reduction estimate");
  app.add_option("--threads", settings.threads, "Worker threads for trials");
  app.add_option("--out", settings.out, "Directory for result tables");
  CLI11_PARSE(app, argc, argv);
  if (settings.threads < 1) settings.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"solver correctness", solver_correctness},
      {"OPF baseline", opf_baseline},
      {"power flow self-consistency", pf_consistency},
      {"ADMM equivalence", admm_equivalence},
      {"tolerance-violation trend", tolerance_trend},
      {"tightening update rule", update_rule},
      {"worst-case monotonicity", worst_case_monotone},
      {"zero-violation guarantee", zero_violation},
      {"cost bound", cost_bound},
      {"iteration reduction", iteration_drop},
      {"budget reformulation", budget_encoding},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("criterion %2d %-30s %s  (%.1f s) %s\n", id, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL", secs,
                v.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
