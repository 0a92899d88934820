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

// Worst-case limit violations of a distributed dispatch.
//
// Every region keeps its own copy of its OPF variables, feasible for its own
// (tightened) limits, with boundary copies that may disagree with the
// neighbour's by up to eps. Loads vary per bus within [1 - r, 1 + r] times
// nominal. The physical system then runs with the regions' generator outputs
// and voltage setpoints; the worst case of each physical quantity over this
// set, measured against the original limit, is W. W > 0 means the limit can
// be violated.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dopf/acopf.hpp"
#include "dopf/acpf.hpp"
#include "dopf/netmodel.hpp"
#include "dopf/nlp/model.hpp"
#include "dopf/nlp/solver.hpp"

namespace dopf {

/// Sum of absolute peer mismatches as auxiliary variables t >= |d|, or as
/// one linear row per sign pattern (only for small boundaries).
enum class BudgetEncoding { Auxiliary, SignEnumeration };

struct WcvConfig {
  double eps_pri = 1e-4;
  double load_factor = 0.0;       // r
  std::optional<double> budget;   // beta in (0, 1]; none or 1 means no budget row
  BudgetEncoding encoding = BudgetEncoding::Auxiliary;
  int starts = 3;                 // flat start plus perturbed voltage starts
  double perturbation = 0.05;
  std::uint64_t seed = 0;
  double low_voltage = 0.7;       // screen on system-side magnitudes
  nlp::SolverOptions solver{};
};

struct BoundId {
  LimitFamily family;
  int element;  // bus index, or branch index for flows

  bool operator==(const BoundId&) const = default;
};

std::string bound_name(const Network& net, const BoundId& b);

enum class BoundStatus { Solved, Unknown, EmptySet };

std::string_view to_string(BoundStatus s);

/// Operating point attaining a worst case.
struct Witness {
  LoadAssignment loads;
  Dispatch dispatch;               // regional generator outputs and setpoints
  std::vector<double> mismatches;  // z_mn - z_nm per shared variable
  double value = 0.0;              // physical quantity at the optimum
};

struct WorstCase {
  BoundId bound;
  double w = 0.0;
  BoundStatus status = BoundStatus::Unknown;
  nlp::SolveStatus solver_status = nlp::SolveStatus::NumericalFailure;
  Witness witness;
  std::vector<double> x;  // full solution, usable as a start for related problems
};

struct ViolationReport {
  std::vector<WorstCase> entries;
  bool empty_set = false;  // no distributed operating point exists at all

  const WorstCase* find(const BoundId& b) const;
  double max_w() const;
};

struct WcvCounts {
  int variables = 0;
  int region_rows = 0;
  int mismatch_rows = 0;
  int budget_rows = 0;
  int system_rows = 0;
  int total_rows() const { return region_rows + mismatch_rows + budget_rows + system_rows; }
};

class WcvProblem {
 public:
  /// Throws Error(CrossedBounds) when the tightening crosses a limit and
  /// Error(InvalidArgument) for eps < 0, r outside [0, 1), beta outside (0, 1].
  WcvProblem(const Decomposition& dec, const WcvConfig& cfg, const TightenedBounds* tightening = nullptr);

  /// Every bound in scope: voltages at all buses, reactive output at
  /// generator buses, flows of limited branches.
  std::vector<BoundId> bounds() const;

  /// Maximizes the violation of one bound. `extra_starts` are tried after
  /// the configured ones.
  WorstCase worst_case(const BoundId& bound, std::span<const std::vector<double>> extra_starts = {}) const;

  /// Solves the given bounds (all when empty). A set without any feasible
  /// point yields -infinity for every bound.
  ViolationReport solve(std::span<const BoundId> subset = {}, const ViolationReport* previous = nullptr) const;

  /// Whether any distributed operating point exists.
  bool feasible() const;

  /// Recomputes W of a witness by running the physical power flow on its
  /// loads and dispatch.
  double reevaluate(const BoundId& bound, const Witness& witness) const;

  const nlp::Model& model() const { return model_; }
  const WcvCounts& counts() const { return counts_; }
  const WcvConfig& config() const { return cfg_; }
  const Decomposition& decomposition() const { return *dec_; }
  /// Largest violation of the problem's own constraints at x.
  double constraint_violation(std::span<const double> x) const { return model_.max_violation(x); }

 private:
  struct Objective {
    nlp::Expression expr;
    double sign;  // W = sign * f* - limit
    double limit;
    bool root;    // flows: W = sqrt(f*) - limit
  };
  std::vector<Objective> objectives(const BoundId& bound) const;
  Witness witness(std::span<const double> x) const;
  double physical_value(const BoundId& bound, std::span<const double> x) const;
  std::vector<std::vector<double>> start_points() const;

  const Decomposition* dec_;
  WcvConfig cfg_;
  nlp::Model model_;
  WcvCounts counts_;
  std::vector<GridVariables> region_vars_;
  GridVariables system_;
  std::vector<int> load_factor_;  // per bus, -1 when the bus has no load
  std::vector<int> system_q_;     // per bus, aggregate reactive injection at generator buses
  int slack_p_ = -1;
  // Per boundary and shared entry, the model indices of both copies.
  std::vector<std::vector<std::pair<int, int>>> copies_;
  std::vector<int> voltage_vars_;
};

/// Bounds whose previous worst case was above -margin, or not solved.
std::vector<BoundId> screen_bounds(const ViolationReport& report, double margin);

}  // namespace dopf
