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

// Newton-Raphson AC power flow for a fixed dispatch, and measurement of
// limit violations in the resulting operating point.

#pragma once

#include <string_view>
#include <vector>

#include "dopf/acopf.hpp"
#include "dopf/netmodel.hpp"

namespace dopf {

enum class PfStatus { Converged, NotConverged, LowVoltage };

std::string_view to_string(PfStatus s);

struct PfOptions {
  double tol = 1e-8;  // max active/reactive mismatch, pu
  int max_iterations = 50;
  double low_voltage = 0.7;  // solutions with any magnitude below this are rejected
};

struct PfSolution {
  PfStatus status = PfStatus::NotConverged;
  std::vector<double> v, theta;                  // per bus
  std::vector<double> pg, qg;                    // per generator
  std::vector<double> p_from, q_from, p_to, q_to;  // per branch
  int iterations = 0;
  double max_mismatch = 0.0;

  bool converged() const { return status == PfStatus::Converged; }
};

/// Buses with generators hold their voltage setpoint (PV); the reference
/// bus also holds the angle and absorbs the active imbalance. Reactive
/// limits are not enforced. Reactive output is split among a bus's
/// generators in proportion to their reactive ranges, the slack's active
/// output in proportion to active ranges.
PfSolution run_pf(const Network& net, const Dispatch& dispatch, const LoadAssignment& loads,
                  const PfOptions& options = {});

enum class LimitFamily { VoltageUpper, VoltageLower, ReactiveUpper, ReactiveLower, Flow };

std::string_view to_string(LimitFamily f);

struct Violation {
  LimitFamily family;
  int element = 0;       // bus index (voltage, reactive) or branch index (flow)
  double excess = 0.0;   // pu beyond the limit, > 0
  double percent = 0.0;  // 100 * excess / (max - min)
};

struct ViolationMetrics {
  int count = 0;
  double average_percent = 0.0;  // mean of `percent` over violations, 0 when none
  std::vector<Violation> violations;
};

/// Excess (pu) below which a limit counts as met; the customary OPF
/// constraint-violation tolerance.
inline constexpr double kViolationTolerance = 5e-6;

/// Checks the network's own (untightened) limits: voltage magnitude at every
/// bus, aggregate reactive output at generator buses, apparent flow at the
/// worse end of every limited branch (range [0, rate]). Only excesses above
/// `tolerance` are reported.
ViolationMetrics measure_violations(const Network& net, const PfSolution& pf,
                                    double tolerance = kViolationTolerance);

}  // namespace dopf
