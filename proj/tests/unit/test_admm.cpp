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

#include <algorithm>
#include <cmath>
#include <memory>

#include "dopf/acopf.hpp"
#include "dopf/admm.hpp"
#include "dopf/error.hpp"
#include "dopf/tighten.hpp"
#include "toy_cases.hpp"

using namespace dopf;
using namespace dopf::testing;

namespace {

ConsensusState one_pair(std::vector<double> first, std::vector<double> second, std::vector<double> z_bar) {
  ConsensusState s;
  PairState p;
  p.z_first = std::move(first);
  p.z_second = std::move(second);
  p.z_bar = std::move(z_bar);
  p.y_first.assign(p.z_bar.size(), 0.0);
  p.y_second.assign(p.z_bar.size(), 0.0);
  s.pairs = {p};
  s.z_bar_previous = {s.pairs[0].z_bar};
  return s;
}

const Decomposition& case14_three() {
  static const Decomposition d = [] {
    const RawCase c = load_case(data_path("case14.m"));
    return decompose_case(c, fallback_partition(c, 3));
  }();
  return d;
}

double centralized(const Decomposition& d) {
  const OpfResult r = solve_opf(build_opf(d.network));
  EXPECT_TRUE(r.optimal());
  return r.solution.objective;
}

}  // namespace

TEST(Consensus, HandExample) {
  ConsensusState s = one_pair({1.0}, {0.8}, {0.0});
  average_and_update(s, 1000.0);
  const PairState& p = s.pairs[0];
  EXPECT_DOUBLE_EQ(p.z_bar[0], 0.9);
  EXPECT_NEAR(p.y_first[0], 100.0, 1e-10);
  EXPECT_NEAR(p.y_second[0], -100.0, 1e-10);
  EXPECT_NEAR(p.y_first[0] + p.y_second[0], 0.0, 1e-12);
  EXPECT_EQ(s.iteration, 1);
}

TEST(Consensus, AgreementLeavesMultipliersAlone) {
  ConsensusState s = one_pair({0.4, -1.0}, {0.4, -1.0}, {0.0, 0.0});
  s.pairs[0].y_first = {3.0, 4.0};
  s.pairs[0].y_second = {-3.0, -4.0};
  average_and_update(s, 50.0);
  EXPECT_EQ(s.pairs[0].z_bar, (std::vector<double>{0.4, -1.0}));
  EXPECT_EQ(s.pairs[0].y_first, (std::vector<double>{3.0, 4.0}));
  const Residuals r = residuals(s, 50.0);
  EXPECT_EQ(r.primal_inf, 0.0);
  EXPECT_EQ(r.primal_two, 0.0);
  // z_bar moved from zero, so the dual residual does not vanish yet.
  average_and_update(s, 50.0);
  EXPECT_EQ(residuals(s, 50.0).dual_two, 0.0);
}

TEST(Consensus, DeviationsSumToZero) {
  ConsensusState s = one_pair({0.3, 1.7, -2.2}, {-0.1, 1.1, 0.9}, {0, 0, 0});
  average_and_update(s, 10.0);
  const PairState& p = s.pairs[0];
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR((p.z_first[i] - p.z_bar[i]) + (p.z_second[i] - p.z_bar[i]), 0.0, 1e-15);
  }
}

TEST(Consensus, ResidualNorms) {
  // Entries (1, 0.8) and (2, 2.4) after averaging from z_bar_prev = (0.5, 2).
  ConsensusState s = one_pair({1.0, 2.0}, {0.8, 2.4}, {0.5, 2.0});
  average_and_update(s, 10.0);
  const Residuals r = residuals(s, 10.0);
  // z - z_bar over both copies: +-0.1 and +-0.2.
  EXPECT_NEAR(r.primal_inf, 0.2, 1e-12);
  EXPECT_NEAR(r.primal_two, std::sqrt(2 * 0.01 + 2 * 0.04), 1e-12);
  // alpha (z_bar - z_bar_prev) = (4, 2), counted once per copy.
  EXPECT_NEAR(r.dual_inf, 4.0, 1e-12);
  EXPECT_NEAR(r.dual_two, std::sqrt(2 * 16.0 + 2 * 4.0), 1e-12);
  EXPECT_NEAR(r.z_two, std::sqrt(1.0 + 0.64 + 4.0 + 5.76), 1e-12);
  EXPECT_NEAR(r.z_bar_two, std::sqrt(2 * 0.81 + 2 * 4.84), 1e-12);
  EXPECT_NEAR(r.y_two, std::sqrt(2 * 1.0 + 2 * 4.0), 1e-12);
  const auto d = peer_mismatches(s);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d[0], 0.2, 1e-12);
  EXPECT_NEAR(d[1], 0.4, 1e-12);
}

TEST(Consensus, ScaledTolerances) {
  Residuals r;
  r.z_two = 3.0;
  r.z_bar_two = 4.0;
  r.y_two = 12.0;
  AdmmConfig cfg;
  cfg.eps_abs = 1e-3;
  cfg.eps_rel = 0.0;
  Tolerances t = scaled_tolerances(cfg, r, 8);
  EXPECT_NEAR(t.primal, std::sqrt(16.0) * 1e-3, 1e-15);
  EXPECT_NEAR(t.dual, std::sqrt(8.0) * 1e-3, 1e-15);

  cfg.eps_abs = 0.0;
  EXPECT_EQ(scaled_tolerances(cfg, Residuals{}, 8).primal, 0.0);

  cfg.eps_abs = 1e-3;
  cfg.eps_rel = 1e-2;
  t = scaled_tolerances(cfg, r, 8);
  EXPECT_NEAR(t.primal, 4e-3 + 1e-2 * 4.0, 1e-15);
  EXPECT_NEAR(t.dual, std::sqrt(8.0) * 1e-3 + 1e-2 * 12.0, 1e-15);

  AdmmConfig plain;
  plain.eps_pri = 3e-4;
  EXPECT_EQ(scaled_tolerances(plain, r, 8).primal, 3e-4);
}

// ---------------------------------------------------------------------------

TEST(Admm, SingleRegionIsCentralized) {
  const RawCase c = load_case(data_path("case14.m"));
  const Decomposition d = decompose_case(c, fallback_partition(c, 1));
  const AdmmResult r = run_admm(d, {});
  ASSERT_TRUE(r.converged());
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.mismatches.empty());
  EXPECT_NEAR(r.dispatch.objective, centralized(d), 1e-6 * centralized(d));
}

TEST(Admm, ThreeRegionsApproachCentralized) {
  const Decomposition& d = case14_three();
  AdmmConfig cfg;
  cfg.eps_pri = 1e-4;
  const AdmmResult r = run_admm(d, cfg);
  ASSERT_TRUE(r.converged());
  const double ref = centralized(d);
  EXPECT_NEAR(r.dispatch.objective, ref, 0.01 * ref);
  ASSERT_EQ(static_cast<int>(r.mismatches.size()), d.boundary_variable_count());
  for (double m : r.mismatches) EXPECT_LE(m, 2 * cfg.eps_pri + 1e-15);
  EXPECT_LE(r.trace.back().primal_inf, cfg.eps_pri);
  // Most mismatches sit well below the tolerance.
  std::vector<double> sorted = r.mismatches;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_LT(sorted[sorted.size() / 2], cfg.eps_pri);
}

TEST(Admm, StrictPeerBoundsMismatches) {
  AdmmConfig cfg;
  cfg.eps_pri = 1e-3;
  cfg.strict_peer = true;
  const AdmmResult r = run_admm(case14_three(), cfg);
  ASSERT_TRUE(r.converged());
  for (double m : r.mismatches) EXPECT_LE(m, cfg.eps_pri + 1e-15);
}

TEST(Admm, RunsAreReproducible) {
  AdmmConfig cfg;
  cfg.eps_pri = 1e-3;
  const AdmmResult a = run_admm(case14_three(), cfg);
  const AdmmResult b = run_admm(case14_three(), cfg);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].primal_two, b.trace[k].primal_two);
    EXPECT_EQ(a.trace[k].objective, b.trace[k].objective);
  }
  cfg.parallel = true;
  const AdmmResult c = run_admm(case14_three(), cfg);
  EXPECT_EQ(c.iterations, a.iterations);
  EXPECT_EQ(c.dispatch.pg, a.dispatch.pg);
}

TEST(Admm, CheckpointsMatchSeparateRuns) {
  const Decomposition& d = case14_three();
  const LoadAssignment loads = sample_loads(LoadEnvelope::from_network(*d.network, 0.5), 3);
  AdmmConfig cfg;
  cfg.eps_pri = 1e-4;
  const AdmmResult all = run_admm(d, cfg, &loads, nullptr, {1e-2, 1e-3});
  ASSERT_EQ(all.checkpoints.size(), 2u);
  for (const auto& cp : all.checkpoints) {
    ASSERT_TRUE(cp.reached);
    AdmmConfig alone = cfg;
    alone.eps_pri = cp.eps_pri;
    const AdmmResult r = run_admm(d, alone, &loads);
    ASSERT_TRUE(r.converged());
    EXPECT_EQ(r.iterations, cp.iterations);
    EXPECT_EQ(r.dispatch.pg, cp.dispatch.pg);
    EXPECT_EQ(r.mismatches, cp.mismatches);
  }
  EXPECT_GE(all.iterations, all.checkpoints[1].iterations);
  EXPECT_GE(all.checkpoints[1].iterations, all.checkpoints[0].iterations);
}

TEST(Admm, IterationLimitIsReported) {
  AdmmConfig cfg;
  cfg.eps_pri = 1e-9;
  cfg.max_iterations = 5;
  const AdmmResult r = run_admm(case14_three(), cfg);
  EXPECT_EQ(r.status, AdmmStatus::MaxIterations);
  EXPECT_EQ(r.iterations, 5);
}

TEST(Admm, PenaltyVanishesAtTheAverage) {
  // With every local copy equal to z_bar, the augmented objective exceeds
  // the generation cost by exactly y^T z.
  const Decomposition& d = case14_three();
  const LoadAssignment loads = LoadAssignment::nominal(*d.network);
  const OperatingLimits limits = OperatingLimits::from(*d.network);
  RegionSubproblem sub(d, 1, limits, loads);
  ConsensusState state = ConsensusState::flat(d);
  // A quantity shared with two neighbours gets the same average from both.
  for (std::size_t k = 0; k < state.pairs.size(); ++k) {
    auto& p = state.pairs[k];
    for (std::size_t i = 0; i < p.z_bar.size(); ++i) {
      const SharedVariable& sv = d.boundaries[k].variables[i];
      p.z_bar[i] += 0.01 * ((sv.element * 7 + static_cast<int>(sv.quantity)) % 3);
      p.y_first[i] = 0.5 + static_cast<double>(i);
      p.y_second[i] = -0.25 * static_cast<double>(i);
    }
  }
  const double alpha = 1000.0;
  ASSERT_TRUE(sub.solve(state, alpha, {}).optimal());
  std::vector<double> x = sub.solution().x;
  double expected = 0.0;
  for (std::size_t k = 0; k < d.boundaries.size(); ++k) {
    const Boundary& b = d.boundaries[k];
    if (b.first != 1 && b.second != 1) continue;
    const PairState& p = state.pairs[k];
    const auto& y = b.first == 1 ? p.y_first : p.y_second;
    for (std::size_t i = 0; i < b.variables.size(); ++i) {
      x[static_cast<std::size_t>(shared_index(sub.variables(), b.variables[i]))] = p.z_bar[i];
      expected += y[i] * p.z_bar[i];
    }
  }
  double cost = 0.0;
  for (int g : d.regions[1].generators) {
    cost += d.network->generators[static_cast<std::size_t>(g)].cost(
        x[static_cast<std::size_t>(sub.variables().pg[static_cast<std::size_t>(g)])]);
  }
  EXPECT_NEAR(sub.model().objective(x) - cost, expected, 1e-8 * std::max(1.0, std::abs(expected)));
}
