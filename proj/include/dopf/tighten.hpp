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

// Alternating bound tightening: compute worst-case violations at the current
// tightening, move every tightening by its violation, check that the
// tightened OPF is still feasible at nominal loads, and stop once the
// tightening vector settles.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "dopf/acopf.hpp"
#include "dopf/acpf.hpp"
#include "dopf/admm.hpp"
#include "dopf/netmodel.hpp"
#include "dopf/wcv.hpp"

namespace dopf {

/// One tightening step: grow by a positive violation, otherwise give back
/// up to the slack, never below zero.
double update_lambda(double previous, double w);

/// The tightening entry that belongs to a bound.
double& lambda_entry(TightenedBounds& t, const BoundId& b);
double lambda_entry(const TightenedBounds& t, const BoundId& b);

struct TighteningPass;

struct TighteningConfig {
  double eps_pri = 1e-2;
  double load_factor = 0.5;
  std::optional<double> budget;
  double gamma = 1e-4;
  int max_outer_iterations = 20;
  bool screen = true;
  double screen_margin = -1.0;  // negative means 10 eps
  WcvConfig worst_case{};       // eps, load factor and budget are taken from above
  nlp::SolverOptions opf_solver{};
  std::function<void(int, const TighteningPass&)> on_pass;  // called after every outer pass
};

enum class TighteningStatus { Completed, Failed, OuterIterationLimit };

std::string_view to_string(TighteningStatus s);

struct TighteningPass {
  int solved = 0;        // worst-case problems solved in the pass
  double max_w = 0.0;    // largest violation found
  double step = 0.0;     // |lambda_next - lambda|_2
  double seconds = 0.0;
};

struct TighteningResult {
  TighteningStatus status = TighteningStatus::OuterIterationLimit;
  TightenedBounds lambda;
  std::vector<TighteningPass> passes;
  ViolationReport last_report;
  std::vector<BoundId> unknown;  // bounds whose worst case could not be solved
  std::optional<double> tightened_objective;  // nominal tightened OPF, when feasible
  std::string reason;
  double seconds = 0.0;

  bool completed() const { return status == TighteningStatus::Completed; }
  /// Completed with unsolved bounds: a certification run is required.
  bool needs_certification() const { return !unknown.empty(); }
};

TighteningResult tighten_bounds(const Decomposition& dec, const TighteningConfig& cfg);

struct CertifyConfig {
  AdmmConfig admm{};  // eps_pri there is the distributed tolerance
  double load_factor = 0.5;
  int trials = 100;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  AdmmStatus admm = AdmmStatus::MaxIterations;
  PfStatus pf = PfStatus::NotConverged;
  int iterations = 0;
  ViolationMetrics metrics;
  double objective = 0.0;

  bool ok() const { return admm == AdmmStatus::Converged && pf == PfStatus::Converged; }
};

struct CertificationReport {
  std::vector<TrialOutcome> trials;
  int failures = 0;  // trials whose distributed run or power flow failed
  double median_count = 0.0;
  double median_percent = 0.0;
  double max_percent = 0.0;
  double median_iterations = 0.0;
};

/// Runs the distributed OPF with the given tightening on sampled loads and
/// measures violations of the original limits in the resulting physical
/// operating point.
CertificationReport certify(const Decomposition& dec, const TightenedBounds& lambda, const CertifyConfig& cfg);

/// Median of a sample (mean of the middle pair for even sizes); NaN when empty.
double median(std::vector<double> values);

/// Percentile by linear interpolation, p in [0, 100]; NaN when empty.
double percentile(std::vector<double> values, double p);

}  // namespace dopf
