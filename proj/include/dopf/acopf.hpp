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

// Centralized AC optimal power flow, plus the formulation helpers that the
// distributed and worst-case problems assemble their models from.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dopf/netmodel.hpp"
#include "dopf/nlp/model.hpp"
#include "dopf/nlp/solver.hpp"

namespace dopf {

/// Amounts by which operating limits are pulled inwards, all in pu and
/// nonnegative. Reactive entries are per bus and only meaningful at buses
/// hosting generators; flow entries only for branches with a limit.
struct TightenedBounds {
  std::vector<double> v_lower;
  std::vector<double> v_upper;
  std::vector<double> q_lower;
  std::vector<double> q_upper;
  std::vector<double> s_upper;

  static TightenedBounds zero(const Network& net);
  bool all_zero() const;
  /// Euclidean distance between two tightening vectors of the same network.
  double distance(const TightenedBounds& other) const;
};

/// Operating limits after tightening. Reactive limits are per generator: a
/// bus-level tightening is shared among the bus's generators in proportion
/// to their reactive ranges.
struct OperatingLimits {
  std::vector<double> vmin, vmax;                // per bus
  std::vector<double> qmin, qmax;                // per generator
  std::vector<std::optional<double>> smax;       // per branch

  /// Throws Error(CrossedBounds) if any tightened pair crosses.
  static OperatingLimits from(const Network& net, const TightenedBounds* tightening = nullptr);
};

// ---------------------------------------------------------------------------
// Formulation helpers

/// Model indices of network quantities; -1 where a quantity is not modelled.
struct GridVariables {
  std::vector<int> v, theta;                        // per bus
  std::vector<int> pg, qg;                          // per generator
  std::vector<int> p_from, q_from, p_to, q_to;      // per branch

  static GridVariables empty(const Network& net);
};

/// Adds magnitude and angle variables for a bus (flat start, magnitude
/// clamped into its bounds).
void add_bus(nlp::Model& m, GridVariables& vars, int bus, double vmin, double vmax);

/// Adds active and reactive output of a generator, started mid-range.
void add_generator(nlp::Model& m, GridVariables& vars, const Network& net, int gen, double qmin, double qmax);

/// Adds flow variables at both ends of a branch with their defining
/// equalities, and the apparent-power limit at both ends when `smax` is set.
/// Both end buses must already be modelled.
void add_branch(nlp::Model& m, GridVariables& vars, const Network& net, int branch, std::optional<double> smax);

/// Demand at a bus: constant, or nominal values times a factor variable.
struct BusDemand {
  double pd = 0.0;
  double qd = 0.0;
  int factor = -1;
};

/// Active and reactive balance at a bus:
///   sum p_inj - sum(flows leaving) - gs v^2 = pd
///   sum q_inj - sum(flows leaving) + bs v^2 = qd
/// using every branch end at the bus that `vars` models.
void add_balance(nlp::Model& m, const GridVariables& vars, const Network& net, int bus, std::span<const int> p_inj,
                 std::span<const int> q_inj, const BusDemand& demand);

/// Generator variables at a bus present in `vars`.
std::vector<int> active_injections(const GridVariables& vars, const Network& net, int bus);
std::vector<int> reactive_injections(const GridVariables& vars, const Network& net, int bus);

/// Generation cost terms for the generators in `gens`.
void add_generation_cost(nlp::Expression& objective, const GridVariables& vars, const Network& net,
                         std::span<const int> gens);

// ---------------------------------------------------------------------------
// Centralized OPF

/// Setpoints handed to the physical system: generator outputs and the
/// voltage magnitude at every generator bus (including the slack).
struct Dispatch {
  std::vector<double> pg;                // per generator
  std::vector<double> voltage_setpoint;  // per bus; NaN at buses without generators
  double slack_angle = 0.0;
  double objective = 0.0;
};

/// Per-network values read back from a solved model.
struct GridState {
  std::vector<double> v, theta;
  std::vector<double> pg, qg;
  std::vector<double> p_from, q_from, p_to, q_to;
};

GridState read_state(const GridVariables& vars, std::span<const double> x);

class OpfModel {
 public:
  const Network& network() const { return *net_; }
  std::shared_ptr<const Network> network_ptr() const { return net_; }
  const nlp::Model& model() const { return model_; }
  nlp::Model& model() { return model_; }
  const GridVariables& variables() const { return vars_; }
  const OperatingLimits& limits() const { return limits_; }
  /// Index of the first balance row of each bus (active row; reactive follows).
  int balance_row(int bus) const { return balance_row_[static_cast<std::size_t>(bus)]; }

 private:
  friend OpfModel build_opf(std::shared_ptr<const Network>, const TightenedBounds*, const LoadAssignment*);
  std::shared_ptr<const Network> net_;
  nlp::Model model_;
  GridVariables vars_;
  OperatingLimits limits_;
  std::vector<int> balance_row_;
};

/// Builds the OPF at the given loads (nominal when null), with limits
/// tightened when `tightening` is given.
OpfModel build_opf(std::shared_ptr<const Network> net, const TightenedBounds* tightening = nullptr,
                   const LoadAssignment* loads = nullptr);

struct OpfResult {
  nlp::NlpSolution solution;
  GridState state;
  Dispatch dispatch;

  bool optimal() const { return solution.optimal(); }
};

OpfResult solve_opf(const OpfModel& model, const nlp::SolverOptions& options = {});

/// Largest active/reactive balance residual (pu) of a state at given loads.
double balance_residual(const Network& net, const GridState& state, const LoadAssignment& loads);

/// (tight - base) / base. Throws Error(NonpositiveBase) when base <= 0.
double cost_gap(double tight, double base);

}  // namespace dopf
