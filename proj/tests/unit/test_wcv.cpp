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

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "dopf/error.hpp"
#include "dopf/wcv.hpp"
#include "toy_cases.hpp"
#include "toy_oracle.hpp"

using namespace dopf;
using namespace dopf::testing;

namespace {

const TwoBusSpec kToy{};
constexpr double kToyRange = 0.5;

struct Toy {
  RawCase raw = two_bus_case(kToy);
  Decomposition dec = decompose_case(raw, split_partition(raw, {{1, 1}, {2, 2}}));
};

const Toy& toy() {
  static const Toy t;
  return t;
}

WcvConfig toy_config(double eps, std::optional<double> budget = std::nullopt) {
  WcvConfig c;
  c.eps_pri = eps;
  c.load_factor = kToyRange;
  c.budget = budget;
  return c;
}

const BoundId kV2Upper{LimitFamily::VoltageUpper, 1};

const Decomposition& case14_three() {
  static const Decomposition d = [] {
    const RawCase c = load_case(data_path("case14.m"));
    return decompose_case(c, fallback_partition(c, 3));
  }();
  return d;
}

}  // namespace

TEST(WorstCase, ToyMatchesGridSearch) {
  for (double eps : {1e-3, 1e-2, 2e-2}) {
    const WcvProblem p(toy().dec, toy_config(eps));
    const WorstCase wc = p.worst_case(kV2Upper);
    ASSERT_EQ(wc.status, BoundStatus::Solved);
    EXPECT_NEAR(wc.w, oracle_v2_upper(kToy, kToyRange, eps), 1e-4) << "eps " << eps;
    EXPECT_GT(wc.w, 0.0);
  }
}

TEST(WorstCase, ToyWithoutMismatchIsSafe) {
  const Toy& t = toy();
  WcvConfig c = toy_config(0.0);
  c.load_factor = 0.0;
  const WcvProblem p(t.dec, c);
  for (const auto& e : p.solve().entries) {
    ASSERT_EQ(e.status, BoundStatus::Solved) << bound_name(*t.dec.network, e.bound);
    EXPECT_LE(e.w, 1e-6) << bound_name(*t.dec.network, e.bound);
  }
}

TEST(WorstCase, ToyMonotoneInTolerance) {
  const WcvProblem narrow(toy().dec, toy_config(5e-3));
  const WcvProblem wide(toy().dec, toy_config(1e-2));
  const ViolationReport a = narrow.solve();
  const ViolationReport b = wide.solve({}, &a);
  for (std::size_t k = 0; k < a.entries.size(); ++k) {
    ASSERT_EQ(a.entries[k].status, BoundStatus::Solved);
    ASSERT_EQ(b.entries[k].status, BoundStatus::Solved);
    EXPECT_LE(a.entries[k].w, b.entries[k].w + 1e-6) << bound_name(*toy().dec.network, a.entries[k].bound);
  }
}

TEST(WorstCase, ToyMonotoneInBudget) {
  double previous = -std::numeric_limits<double>::infinity();
  for (double beta : {0.05, 0.25, 0.5, 1.0}) {
    const WcvProblem p(toy().dec, toy_config(1e-2, beta));
    const WorstCase wc = p.worst_case(kV2Upper);
    ASSERT_EQ(wc.status, BoundStatus::Solved);
    EXPECT_GE(wc.w, previous - 1e-6) << "beta " << beta;
    previous = wc.w;
  }
}

TEST(WorstCase, BudgetEncodingsAgree) {
  for (double beta : {0.25, 0.5, 1.0}) {
    WcvConfig aux = toy_config(1e-2, beta);
    WcvConfig signs = aux;
    signs.encoding = BudgetEncoding::SignEnumeration;
    const WcvProblem a(toy().dec, aux), b(toy().dec, signs);
    if (beta < 1.0) {
      EXPECT_EQ(a.counts().budget_rows, 2 * 8 + 1);
      EXPECT_EQ(b.counts().budget_rows, 1 << 8);
    }
    for (const BoundId& bound : a.bounds()) {
      const WorstCase wa = a.worst_case(bound), wb = b.worst_case(bound);
      ASSERT_EQ(wa.status, BoundStatus::Solved);
      ASSERT_EQ(wb.status, BoundStatus::Solved);
      EXPECT_NEAR(wa.w, wb.w, 1e-6) << "beta " << beta << " " << bound_name(*toy().dec.network, bound);
    }
  }
}

TEST(WorstCase, WitnessesReproduceW) {
  const WcvProblem p(toy().dec, toy_config(1e-2, 0.5));
  for (const auto& e : p.solve().entries) {
    ASSERT_EQ(e.status, BoundStatus::Solved);
    EXPECT_LE(p.constraint_violation(e.x), 1e-6);
    EXPECT_NEAR(p.reevaluate(e.bound, e.witness), e.w, 1e-6) << bound_name(*toy().dec.network, e.bound);
    ASSERT_EQ(e.witness.mismatches.size(), 8u);
    double total = 0.0;
    for (double d : e.witness.mismatches) {
      EXPECT_LE(std::abs(d), 1e-2 + 1e-8);
      total += std::abs(d);
    }
    EXPECT_LE(total, 0.5 * 8 * 1e-2 + 1e-7);
  }
}

TEST(WorstCase, EmptySetGivesSentinel) {
  // A low bus-1 voltage cannot hold bus 2 inside its narrow band.
  RawCase raw = two_bus_case({.pd_mw = 2.0, .qd_mvar = 1.0, .v2_min = 0.99, .v2_max = 1.0});
  raw.buses[0].vmax = 0.96;
  const Decomposition dec = decompose_case(raw, split_partition(raw, {{1, 1}, {2, 2}}));
  WcvConfig c = toy_config(1e-3);
  c.load_factor = 0.0;
  const ViolationReport r = WcvProblem(dec, c).solve();
  EXPECT_TRUE(r.empty_set);
  for (const auto& e : r.entries) {
    EXPECT_EQ(e.status, BoundStatus::EmptySet);
    EXPECT_EQ(e.w, -std::numeric_limits<double>::infinity());
  }
}

TEST(WorstCase, RejectsBadConfigurations) {
  EXPECT_THROW(WcvProblem(toy().dec, toy_config(-1.0)), Error);
  WcvConfig c = toy_config(1e-3, 0.0);
  EXPECT_THROW(WcvProblem(toy().dec, c), Error);
  c = toy_config(1e-3);
  c.load_factor = 1.0;
  EXPECT_THROW(WcvProblem(toy().dec, c), Error);
  TightenedBounds crossed = TightenedBounds::zero(*toy().dec.network);
  crossed.v_upper[1] = 0.2;
  EXPECT_THROW(WcvProblem(toy().dec, toy_config(1e-3), &crossed), Error);
}

// ---------------------------------------------------------------------------

TEST(WorstCase, Case14Counts) {
  const Decomposition& d = case14_three();
  const Network& net = *d.network;
  int vars = 0, region_rows = 0;
  for (const auto& r : d.regions) {
    const int buses = static_cast<int>(r.buses.size() + r.fictitious_buses.size());
    int rated = 0;
    for (int l : r.branches) rated += net.branches[static_cast<std::size_t>(l)].rate.has_value();
    vars += 2 * buses + 2 * static_cast<int>(r.generators.size()) + 4 * static_cast<int>(r.branches.size());
    region_rows += 2 * static_cast<int>(r.buses.size()) + 4 * static_cast<int>(r.branches.size()) + 2 * rated;
  }
  int loaded = 0;
  for (const auto& b : net.buses) loaded += (b.pd != 0.0 || b.qd != 0.0);
  const int n = static_cast<int>(net.bus_count()), gen_buses = static_cast<int>(net.generator_buses.size());
  const int lines = static_cast<int>(net.branches.size());
  const int nb = d.boundary_variable_count();
  vars += loaded + (n - gen_buses) + n + gen_buses + 1 + 4 * lines;

  WcvConfig c;
  c.eps_pri = 1e-2;
  c.load_factor = 0.5;
  const WcvProblem plain(d, c);
  EXPECT_EQ(plain.counts().variables, vars);
  EXPECT_EQ(plain.counts().region_rows, region_rows);
  EXPECT_EQ(plain.counts().mismatch_rows, nb);
  EXPECT_EQ(plain.counts().budget_rows, 0);
  EXPECT_EQ(plain.counts().system_rows, 2 * n + 4 * lines);
  EXPECT_EQ(plain.model().num_constraints(), plain.counts().total_rows());

  c.budget = 0.1;
  const WcvProblem budgeted(d, c);
  EXPECT_EQ(budgeted.counts().variables, vars + nb);
  EXPECT_EQ(budgeted.counts().budget_rows, 2 * nb + 1);
  c.encoding = BudgetEncoding::SignEnumeration;
  EXPECT_THROW(WcvProblem(d, c), Error);  // far too many sign patterns
}

TEST(WorstCase, Case14ConsensusAtNominalIsSafe) {
  WcvConfig c;
  c.eps_pri = 0.0;
  c.load_factor = 0.0;
  c.starts = 1;
  const WcvProblem p(case14_three(), c);
  for (const auto& e : p.solve().entries) {
    ASSERT_EQ(e.status, BoundStatus::Solved) << bound_name(*case14_three().network, e.bound);
    EXPECT_LE(e.w, 1e-6) << bound_name(*case14_three().network, e.bound);
  }
}

TEST(WorstCase, Case14Monotone) {
  const Decomposition& d = case14_three();
  const Network& net = *d.network;
  const std::vector<BoundId> subset{{LimitFamily::ReactiveLower, 0}, {LimitFamily::ReactiveUpper, 1},
                                    {LimitFamily::VoltageUpper, 13}, {LimitFamily::VoltageLower, 13},
                                    {LimitFamily::ReactiveUpper, 7}};
  auto run = [&](double eps, std::optional<double> beta, const ViolationReport* previous) {
    WcvConfig c;
    c.eps_pri = eps;
    c.load_factor = 0.5;
    c.budget = beta;
    return WcvProblem(d, c).solve(subset, previous);
  };
  const ViolationReport small = run(5e-3, 0.1, nullptr);
  const ViolationReport wider = run(1e-2, 0.1, &small);
  const ViolationReport loose = run(1e-2, std::nullopt, &wider);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const std::string name = bound_name(net, subset[k]);
    ASSERT_EQ(small.entries[k].status, BoundStatus::Solved) << name;
    ASSERT_EQ(wider.entries[k].status, BoundStatus::Solved) << name;
    ASSERT_EQ(loose.entries[k].status, BoundStatus::Solved) << name;
    EXPECT_LE(small.entries[k].w, wider.entries[k].w + 1e-6) << name;
    EXPECT_LE(wider.entries[k].w, loose.entries[k].w + 1e-6) << name;
  }
  const WcvProblem reference(d, WcvConfig{});
  for (const auto* r : {&small, &wider, &loose}) {
    for (const auto& e : r->entries) {
      EXPECT_NEAR(reference.reevaluate(e.bound, e.witness), e.w, 1e-6) << bound_name(net, e.bound);
    }
  }
}

TEST(WorstCase, ScreenKeepsNearOrUnknownBounds) {
  ViolationReport r;
  auto add = [&](int element, double w, BoundStatus s) {
    WorstCase wc;
    wc.bound = {LimitFamily::VoltageUpper, element};
    wc.w = w;
    wc.status = s;
    r.entries.push_back(wc);
  };
  add(0, -0.5, BoundStatus::Solved);
  add(1, -0.05, BoundStatus::Solved);
  add(2, 0.01, BoundStatus::Solved);
  add(3, -1.0, BoundStatus::Unknown);
  const auto kept = screen_bounds(r, 0.1);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].element, 1);
  EXPECT_EQ(kept[1].element, 2);
  EXPECT_EQ(kept[2].element, 3);
  ViolationReport quiet;
  quiet.entries = {r.entries[0]};
  EXPECT_TRUE(screen_bounds(quiet, 0.1).empty());
  EXPECT_DOUBLE_EQ(r.max_w(), 0.01);
}

TEST(WorstCase, BoundNames) {
  const Network& net = *case14_three().network;
  EXPECT_EQ(bound_name(net, {LimitFamily::VoltageUpper, 13}), "v_upper:14");
  EXPECT_EQ(bound_name(net, {LimitFamily::ReactiveLower, 0}), "q_lower:1");
}
