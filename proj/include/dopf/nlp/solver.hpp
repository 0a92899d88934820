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

// Primal-dual interior point method with a filter line search, in the style
// of Wächter and Biegler's algorithm. Returns a local optimum.

#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "dopf/nlp/problem.hpp"

namespace dopf::nlp {

enum class SolveStatus { Optimal, MaxIterations, Infeasible, NumericalFailure };

std::string_view to_string(SolveStatus s);

struct SolverOptions {
  double tol = 1e-8;              // scaled KKT error
  double constraint_tol = 1e-8;   // unscaled constraint violation
  double acceptable_tol = 1e-6;   // scaled KKT error accepted after acceptable_iterations
  int acceptable_iterations = 15;
  // Total acceptable-level iterates, consecutive or not, after which the
  // best of them is returned; also returned at the iteration limit. Guards
  // against creeping along flat valleys with oscillating feasibility.
  int acceptable_limit = 60;
  // Once an acceptable iterate exists, an objective that moves by less than
  // stall_tol (relative) over stall_iterations also ends the run there.
  int stall_iterations = 50;
  double stall_tol = 1e-5;
  int max_iterations = 500;
  double mu_init = 0.1;
  double bound_push = 1e-2;
  double bound_relax = 1e-10;
  double max_gradient = 100.0;  // gradient-based scaling target; <= 0 disables
  // Used when the warm start carries multipliers.
  double warm_mu_init = 1e-5;
  double warm_bound_push = 1e-5;
  bool allow_restoration = true;
  std::ostream* log = nullptr;
};

/// Starting point. `y`, `z_lower` and `z_upper` are optional; when all three
/// are present the multipliers are reused and the barrier parameter starts at
/// warm_mu_init.
struct WarmStart {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z_lower;
  std::vector<double> z_upper;
};

/// Multipliers follow  grad f + J^T y - z_lower + z_upper = 0.
struct NlpSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z_lower;
  std::vector<double> z_upper;
  double objective = 0.0;
  double primal_infeasibility = 0.0;  // unscaled, max over bounds and constraints
  double dual_infeasibility = 0.0;    // scaled
  double complementarity = 0.0;       // scaled
  int iterations = 0;
  bool acceptable = false;  // Optimal only at the acceptable level
  bool restored = false;    // the restoration phase ran at least once

  bool optimal() const { return status == SolveStatus::Optimal; }
  WarmStart warm_start() const { return {x, y, z_lower, z_upper}; }
};

/// Throws Error(CallbackFailure) when the problem returns non-finite values
/// at the starting point and Error(DimensionMismatch) for inconsistent sizes.
NlpSolution solve(const NlpProblem& problem, const SolverOptions& options = {}, const WarmStart* start = nullptr);

/// Solves from each start and returns the best Optimal result (lowest
/// objective), or the least infeasible attempt when none is optimal.
NlpSolution multistart_solve(const NlpProblem& problem, std::span<const std::vector<double>> starts,
                             const SolverOptions& options = {});

/// Largest relative error between supplied derivatives and central
/// differences. The Hessian check uses the given multipliers.
struct DerivativeCheck {
  double gradient = 0.0;
  double jacobian = 0.0;
  double hessian = 0.0;
};

DerivativeCheck check_derivatives(const NlpProblem& problem, std::span<const double> x,
                                  std::span<const double> multipliers, double objective_factor = 1.0,
                                  double step = 1e-6);

}  // namespace dopf::nlp
