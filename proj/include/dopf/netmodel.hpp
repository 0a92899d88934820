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

// Per-unit network model, region decomposition and load envelopes.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dopf/caseio.hpp"

namespace dopf {

struct Bus {
  int id = 0;
  bool is_reference = false;
  double gs = 0.0;  // shunt conductance, pu
  double bs = 0.0;  // shunt susceptance, pu
  double vmin = 0.9;
  double vmax = 1.1;
  double pd = 0.0;  // nominal demand, pu
  double qd = 0.0;
};

struct Generator {
  int bus = 0;  // bus index (not id)
  double pmin = 0.0;
  double pmax = 0.0;
  double qmin = 0.0;
  double qmax = 0.0;
  double vg = 1.0;
  // Cost in $/h as a function of output in pu: c2 p^2 + c1 p + c0.
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double cost(double p) const { return (c2 * p + c1) * p + c0; }
};

/// Coefficients of the flow leaving bus i towards bus j:
///   p_ij =  g_self v_i^2 + v_i v_j (g_mut cos(th_i - th_j) + b_mut sin(th_i - th_j))
///   q_ij = -b_self v_i^2 + v_i v_j (g_mut sin(th_i - th_j) - b_mut cos(th_i - th_j))
/// i.e. the self and mutual entries of the branch's 2x2 admittance matrix.
struct FlowCoefficients {
  double g_self = 0.0;
  double b_self = 0.0;
  double g_mut = 0.0;
  double b_mut = 0.0;

  double p(double vi, double vj, double angle_ij) const;
  double q(double vi, double vj, double angle_ij) const;
};

struct Branch {
  int from = 0;  // bus indices
  int to = 0;
  double g = 0.0;         // series conductance
  double b = 0.0;         // series susceptance
  double b_charge = 0.0;  // half of the total line charging
  double tap = 1.0;
  double shift = 0.0;  // radians
  FlowCoefficients from_end;
  FlowCoefficients to_end;
  std::optional<double> rate;  // thermal limit in pu; absent means unlimited
};

struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  int reference = 0;  // index of the single reference bus

  std::vector<std::vector<int>> generators_at_bus;  // per bus, generator indices
  std::vector<int> generator_buses;                 // sorted bus indices hosting generators
  std::vector<std::vector<int>> branches_from;      // per bus, branches with from == bus
  std::vector<std::vector<int>> branches_to;

  int bus_index(int id) const;
  std::size_t bus_count() const { return buses.size(); }

  /// Aggregate reactive limits of the generators at bus `i`.
  double bus_qmin(int i) const;
  double bus_qmax(int i) const;
  bool has_generator(int i) const { return !generators_at_bus[static_cast<std::size_t>(i)].empty(); }
};

/// Converts MATPOWER units to per unit and derives branch admittances from
/// r, x, tap and phase shift. A zero rateA becomes an absent limit.
Network to_per_unit(const RawCase& c);

// ---------------------------------------------------------------------------
// Decomposition

enum class SharedQuantity { VoltageMagnitude, VoltageAngle, ActiveFrom, ReactiveFrom, ActiveTo, ReactiveTo };

/// One boundary quantity. `element` is a bus index for voltages and a branch
/// index for flows.
struct SharedVariable {
  SharedQuantity quantity;
  int element;

  bool operator==(const SharedVariable&) const = default;
};

struct Region {
  int id = 0;  // 1-based, as in the partition file
  std::vector<int> buses;             // owned buses
  std::vector<int> fictitious_buses;  // copies of neighbouring boundary buses
  std::vector<int> generators;
  std::vector<int> branches;  // internal branches plus every cut branch touching the region
  std::vector<int> neighbors;  // region indices
  bool has_reference = false;
};

/// Variables shared by regions `first < second`. Both regions hold a copy of
/// every entry, in this order, so the k-th entries of z_{m,n} and z_{n,m}
/// refer to the same physical quantity.
struct Boundary {
  int first = 0;
  int second = 0;
  std::vector<int> cut_branches;
  std::vector<SharedVariable> variables;
};

struct Decomposition {
  std::shared_ptr<const Network> network;
  std::vector<Region> regions;
  std::vector<Boundary> boundaries;
  std::vector<int> region_of_bus;  // region index per bus
  std::vector<int> cut_branches;

  std::size_t region_count() const { return regions.size(); }
  /// N_b: total number of shared variables over all neighbouring pairs.
  int boundary_variable_count() const;
};

Decomposition decompose(std::shared_ptr<const Network> net, const PartitionSpec& spec);

// ---------------------------------------------------------------------------
// Loads

struct LoadEnvelope {
  double r = 0.0;  // loads vary within [1 - r, 1 + r] times nominal
  std::vector<double> pd_nominal;
  std::vector<double> qd_nominal;

  static LoadEnvelope from_network(const Network& net, double r);
};

struct LoadAssignment {
  std::vector<double> factor;  // per bus, applied to both p and q
  std::vector<double> pd;
  std::vector<double> qd;

  static LoadAssignment nominal(const Network& net);
};

/// Draws u_i ~ U[1 - r, 1 + r] per bus from a generator seeded with `seed`.
LoadAssignment sample_loads(const LoadEnvelope& env, std::uint64_t seed);

/// Seed of the `index`-th trial derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace dopf
