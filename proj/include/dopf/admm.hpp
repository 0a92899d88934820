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

// Consensus ADMM for distributed AC OPF. Every region solves its own OPF
// augmented with a multiplier term and a quadratic penalty on the shared
// boundary quantities, the two copies of each quantity are averaged, and
// multipliers move by the penalty times the local deviation.

#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "dopf/acopf.hpp"
#include "dopf/netmodel.hpp"
#include "dopf/nlp/model.hpp"
#include "dopf/nlp/solver.hpp"

namespace dopf {

// ---------------------------------------------------------------------------
// Region formulation, shared with the worst-case problems

/// Adds a region's buses (owned and fictitious), generators, branches and
/// owned-bus balances to `m`. Fictitious buses carry the same voltage limits
/// as their originals but no balance. The angle is fixed to zero only in the
/// region holding the reference bus.
void add_region(nlp::Model& m, GridVariables& vars, const Decomposition& dec, int region,
                const OperatingLimits& limits, const std::function<BusDemand(int bus)>& demand);

/// Model index of one shared quantity.
int shared_index(const GridVariables& vars, const SharedVariable& s);

/// Value of one shared quantity in a full network state.
double shared_value(const GridState& state, const SharedVariable& s);

/// Flat-start value (unit voltages, zero angles) of a shared quantity.
double flat_value(const Network& net, const SharedVariable& s);

// ---------------------------------------------------------------------------
// Consensus state

/// Both copies of the shared vector of one neighbouring pair, the common
/// average and both multiplier vectors. Entries follow Boundary::variables.
struct PairState {
  std::vector<double> z_first, z_second;
  std::vector<double> z_bar;
  std::vector<double> y_first, y_second;
};

struct ConsensusState {
  std::vector<PairState> pairs;  // aligned with Decomposition::boundaries
  std::vector<std::vector<double>> z_bar_previous;
  int iteration = 0;

  /// y = 0 and every copy and average at its flat-start value.
  static ConsensusState flat(const Decomposition& dec);
};

/// Averages both copies and moves multipliers: z_bar = (z_mn + z_nm) / 2,
/// y += alpha (z - z_bar). Keeps the previous averages for the dual residual.
void average_and_update(ConsensusState& state, double alpha);

struct Residuals {
  double primal_inf = 0.0;  // max |z - z_bar| over both copies of every pair
  double primal_two = 0.0;
  double dual_inf = 0.0;  // alpha |z_bar - z_bar_previous| over both copies
  double dual_two = 0.0;
  double z_two = 0.0;      // norms entering the scaled tolerances
  double z_bar_two = 0.0;
  double y_two = 0.0;
};

Residuals residuals(const ConsensusState& state, double alpha);

/// |z_mn - z_nm| for every shared variable of every pair.
std::vector<double> peer_mismatches(const ConsensusState& state);

enum class ResidualNorm { Infinity, Two };

struct AdmmConfig {
  double alpha = 1000.0;
  double eps_pri = 1e-4;
  std::optional<double> eps_dual;  // checked only when set
  ResidualNorm norm = ResidualNorm::Infinity;
  int max_iterations = 2000;
  // When eps_abs is set both tolerances are recomputed each iteration from
  // the absolute/relative pair, and the 2-norm residuals are compared.
  std::optional<double> eps_abs;
  double eps_rel = 0.0;
  // Halve the primal tolerance so that peer mismatches stay within eps_pri.
  bool strict_peer = false;
  bool parallel = false;
  nlp::SolverOptions solver{};
};

struct Tolerances {
  double primal = 0.0;
  double dual = 0.0;
};

/// Primal/dual tolerances in force for the current state.
///   primal = sqrt(p) eps_abs + eps_rel max(|z|, |z_bar|)
///   dual   = sqrt(n) eps_abs + eps_rel |y|
/// with p = 2 N_b consistency constraints and n = N_b, or the fixed values
/// when eps_abs is unset.
Tolerances scaled_tolerances(const AdmmConfig& cfg, const Residuals& res, int boundary_variables);

// ---------------------------------------------------------------------------
// Region subproblems

class RegionSubproblem {
 public:
  RegionSubproblem(const Decomposition& dec, int region, const OperatingLimits& limits, const LoadAssignment& loads);

  /// Minimizes the region's generation cost plus y^T z + alpha/2 |z - z_bar|^2
  /// over the region's feasible set. Warm-starts from the previous solve.
  const nlp::NlpSolution& solve(const ConsensusState& state, double alpha, const nlp::SolverOptions& options);

  /// Local copies of the shared vector towards each neighbour, in
  /// Decomposition::boundaries order (entries empty for other pairs).
  void write_shared(ConsensusState& state) const;

  /// Generation cost of the current solution.
  double generation_cost() const;

  int region() const { return region_; }
  const GridVariables& variables() const { return vars_; }
  const nlp::Model& model() const { return model_; }
  const nlp::NlpSolution& solution() const { return solution_; }

 private:
  const Decomposition* dec_;
  int region_;
  nlp::Model model_;
  GridVariables vars_;
  nlp::Expression cost_;
  // For each boundary touching this region: its index, whether this region
  // is the first member, and the model index of each shared entry.
  struct Link {
    int boundary;
    bool first;
    std::vector<int> index;
  };
  std::vector<Link> links_;
  nlp::NlpSolution solution_;
  bool solved_ = false;
};

// ---------------------------------------------------------------------------
// Driver

enum class AdmmStatus { Converged, MaxIterations, SubproblemFailure };

std::string_view to_string(AdmmStatus s);

struct TraceRow {
  int iteration = 0;
  double primal_inf = 0.0;
  double primal_two = 0.0;
  double dual_two = 0.0;
  double objective = 0.0;  // sum of regional generation costs
};

/// State of the run at the first iteration meeting a tolerance.
struct Checkpoint {
  double eps_pri = 0.0;
  bool reached = false;
  int iterations = 0;
  Dispatch dispatch;
  std::vector<double> mismatches;  // peer mismatches at that iteration
};

struct AdmmResult {
  AdmmStatus status = AdmmStatus::MaxIterations;
  int iterations = 0;
  Dispatch dispatch;
  GridState state;  // owned-bus voltages, owned generators; shared flows from the from-side region
  std::vector<TraceRow> trace;
  std::vector<double> mismatches;  // peer mismatches at exit
  std::vector<Checkpoint> checkpoints;
  int failed_region = -1;

  bool converged() const { return status == AdmmStatus::Converged; }
};

/// Runs until the primal residual (and the dual one when configured) meets
/// its tolerance. Extra primal tolerances in `checkpoints` larger than the
/// configured one are recorded on the way; the trajectory does not depend on
/// them. Loads default to nominal, tightening to none.
AdmmResult run_admm(const Decomposition& dec, const AdmmConfig& cfg, const LoadAssignment* loads = nullptr,
                    const TightenedBounds* tightening = nullptr, const std::vector<double>& checkpoints = {});

}  // namespace dopf
