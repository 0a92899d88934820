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

#include "dopf/tighten.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "dopf/error.hpp"
#include "parallel.hpp"

namespace dopf {

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double update_lambda(double previous, double w) {
  if (w > 0.0) return previous + w;
  if (previous > 0.0) return previous - std::min(-w, previous);
  return previous;
}

double& lambda_entry(TightenedBounds& t, const BoundId& b) {
  const auto e = at(b.element);
  switch (b.family) {
    case LimitFamily::VoltageUpper:
      return t.v_upper.at(e);
    case LimitFamily::VoltageLower:
      return t.v_lower.at(e);
    case LimitFamily::ReactiveUpper:
      return t.q_upper.at(e);
    case LimitFamily::ReactiveLower:
      return t.q_lower.at(e);
    case LimitFamily::Flow:
      return t.s_upper.at(e);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown bound family");
}

double lambda_entry(const TightenedBounds& t, const BoundId& b) {
  return lambda_entry(const_cast<TightenedBounds&>(t), b);
}

std::string_view to_string(TighteningStatus s) {
  switch (s) {
    case TighteningStatus::Completed:
      return "completed";
    case TighteningStatus::Failed:
      return "failed";
    case TighteningStatus::OuterIterationLimit:
      return "outer_iteration_limit";
  }
  return "unknown";
}

TighteningResult tighten_bounds(const Decomposition& dec, const TighteningConfig& cfg) {
  if (!(cfg.gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  if (cfg.max_outer_iterations < 1) throw Error(ErrorKind::InvalidArgument, "need at least one outer iteration");
  const auto t0 = std::chrono::steady_clock::now();
  const Network& net = *dec.network;
  WcvConfig wcfg = cfg.worst_case;
  wcfg.eps_pri = cfg.eps_pri;
  wcfg.load_factor = cfg.load_factor;
  wcfg.budget = cfg.budget;
  const double margin = cfg.screen_margin >= 0.0 ? cfg.screen_margin : 10.0 * cfg.eps_pri;

  TighteningResult out;
  out.lambda = TightenedBounds::zero(net);
  std::vector<BoundId> all;
  std::vector<BoundId> screened;  // bounds kept after the first pass
  const ViolationReport* previous = nullptr;

  for (int k = 0; k < cfg.max_outer_iterations; ++k) {
    const auto tp = std::chrono::steady_clock::now();
    const WcvProblem problem(dec, wcfg, &out.lambda);
    if (all.empty()) all = problem.bounds();

    std::vector<BoundId> subset;
    if (k == 0 || !cfg.screen) {
      subset = all;
    } else {
      subset = screened;
      for (const auto& b : all) {
        if (lambda_entry(out.lambda, b) > 0.0 && std::find(subset.begin(), subset.end(), b) == subset.end()) {
          subset.push_back(b);
        }
      }
    }
    ViolationReport report = problem.solve(subset, previous);
    if (k == 0) screened = screen_bounds(report, margin);

    TighteningPass pass;
    pass.solved = static_cast<int>(report.entries.size());
    pass.max_w = report.max_w();
    if (report.empty_set) {
      out.status = TighteningStatus::Failed;
      out.reason = "no distributed operating point exists at this tightening";
      pass.seconds = seconds_since(tp);
      out.passes.push_back(pass);
      if (cfg.on_pass) cfg.on_pass(k, pass);
      out.last_report = std::move(report);
      break;
    }

    TightenedBounds next = out.lambda;
    out.unknown.clear();
    for (const auto& e : report.entries) {
      if (e.status != BoundStatus::Solved) {
        out.unknown.push_back(e.bound);
        continue;
      }
      double& l = lambda_entry(next, e.bound);
      l = update_lambda(l, e.w);
    }
    pass.step = next.distance(out.lambda);

    // Feasibility of the tightened case at nominal loads.
    bool feasible = true;
    try {
      const OpfModel opf = build_opf(dec.network, &next);
      const OpfResult r = solve_opf(opf, cfg.opf_solver);
      feasible = r.optimal();
      if (feasible) out.tightened_objective = r.solution.objective;
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::CrossedBounds) throw;
      feasible = false;
    }
    pass.seconds = seconds_since(tp);
    out.passes.push_back(pass);
    if (cfg.on_pass) cfg.on_pass(k, pass);
    out.lambda = std::move(next);
    out.last_report = std::move(report);
    previous = &out.last_report;
    if (!feasible) {
      out.status = TighteningStatus::Failed;
      out.reason = "tightened OPF is infeasible at nominal loads";
      out.tightened_objective.reset();
      break;
    }
    if (pass.step <= cfg.gamma) {
      out.status = TighteningStatus::Completed;
      break;
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------

double median(std::vector<double> v) { return percentile(std::move(v), 50.0); }

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

CertificationReport certify(const Decomposition& dec, const TightenedBounds& lambda, const CertifyConfig& cfg) {
  if (cfg.trials < 1) throw Error(ErrorKind::InvalidArgument, "need at least one trial");
  const Network& net = *dec.network;
  const LoadEnvelope env = LoadEnvelope::from_network(net, cfg.load_factor);
  CertificationReport rep;
  rep.trials.resize(at(cfg.trials));
  detail::parallel_for(cfg.trials, cfg.threads, [&](int i) {
    TrialOutcome& t = rep.trials[at(i)];
    t.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    const LoadAssignment loads = sample_loads(env, t.seed);
    const AdmmResult run = run_admm(dec, cfg.admm, &loads, &lambda);
    t.admm = run.status;
    t.iterations = run.iterations;
    t.objective = run.dispatch.objective;
    if (run.converged()) {
      const PfSolution pf = run_pf(net, run.dispatch, loads);
      t.pf = pf.status;
      if (pf.converged()) t.metrics = measure_violations(net, pf);
    }
  });
  std::vector<double> counts, percents, iterations;
  for (const auto& t : rep.trials) {
    if (t.ok()) {
      counts.push_back(t.metrics.count);
      percents.push_back(t.metrics.average_percent);
      iterations.push_back(t.iterations);
    } else {
      ++rep.failures;
    }
  }
  rep.median_count = median(counts);
  rep.median_percent = median(percents);
  rep.max_percent = percents.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : *std::max_element(percents.begin(), percents.end());
  rep.median_iterations = median(iterations);
  return rep;
}

}  // namespace dopf
