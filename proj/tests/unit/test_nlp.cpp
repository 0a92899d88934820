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
#include <limits>
#include <random>
#include <vector>

#include "dopf/error.hpp"
#include "dopf/nlp/model.hpp"
#include "dopf/nlp/solver.hpp"

#include "analytic_problems.hpp"

using namespace dopf::nlp;
using dopf::testing::Hs071;
using dopf::testing::Polynomial1d;
using dopf::testing::Rosenbrock;

TEST(InteriorPoint, SolvesHs071) {
  Hs071 p;
  auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.objective, 17.014017289, 1e-7);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-6);
  EXPECT_NEAR(sol.x[1], 4.7429996, 1e-6);
  EXPECT_NEAR(sol.x[2], 3.8211499, 1e-6);
  EXPECT_NEAR(sol.x[3], 1.3794083, 1e-6);
  EXPECT_LE(sol.primal_infeasibility, 1e-8);
}

TEST(InteriorPoint, SolvesRosenbrockWithoutConstraints) {
  Rosenbrock p;
  auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-6);
  EXPECT_NEAR(sol.x[1], 1.0, 1e-6);
}

TEST(InteriorPoint, ActiveBoundGivesMultiplier) {
  // min (x - 3)^2 with x <= 1: x = 1 and z_upper = 4.
  Model m;
  auto x = m.add_variable(-5.0, 1.0, 0.0);
  Expression f;
  f.add_square(x, 1.0).add_linear(x, -6.0).add_constant(9.0);
  m.set_objective(f);
  auto sol = solve(m);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-7);
  EXPECT_NEAR(sol.z_upper[0], 4.0, 1e-5);
  EXPECT_NEAR(sol.z_lower[0], 0.0, 1e-6);
}

TEST(InteriorPoint, LinearObjectiveOverDisc) {
  Model m;
  auto x = m.add_variable(-kInfinity, kInfinity, 0.3);
  auto y = m.add_variable(-kInfinity, kInfinity, 0.1);
  Expression f;
  f.add_linear(x, 1.0).add_linear(y, 1.0);
  m.set_objective(f);
  Expression disc;
  disc.add_square(x, 1.0).add_square(y, 1.0);
  m.add_constraint(disc, -kInfinity, 2.0);
  auto sol = solve(m);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[0], -1.0, 1e-6);
  EXPECT_NEAR(sol.x[1], -1.0, 1e-6);
  EXPECT_NEAR(sol.y[0], 0.5, 1e-6);
}

TEST(InteriorPoint, EqualityMultiplierSign) {
  // min x^2 + y^2 s.t. x + y = 1: grad f + y J = 0 gives y = -1.
  Model m;
  auto x = m.add_variable(-kInfinity, kInfinity, 0.0);
  auto y = m.add_variable(-kInfinity, kInfinity, 0.0);
  Expression f;
  f.add_square(x, 1.0).add_square(y, 1.0);
  m.set_objective(f);
  Expression g;
  g.add_linear(x, 1.0).add_linear(y, 1.0);
  m.add_constraint(g, 1.0, 1.0);
  auto sol = solve(m);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[0], 0.5, 1e-8);
  EXPECT_NEAR(sol.x[1], 0.5, 1e-8);
  EXPECT_NEAR(sol.y[0], -1.0, 1e-7);
}

TEST(InteriorPoint, FixedVariablesStayPut) {
  Model m;
  auto x = m.add_variable(2.0, 2.0, 0.0);
  auto y = m.add_variable(-10.0, 10.0, 0.0);
  Expression f;
  f.add_square(y, 1.0).add_product(x, y, -2.0);  // (y - x)^2 - x^2
  m.set_objective(f);
  auto sol = solve(m);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_EQ(sol.x[0], 2.0);
  EXPECT_NEAR(sol.x[1], 2.0, 1e-7);
  // d/dx at the solution is -2y = -4, so the lower-bound multiplier is -4 -> reported on the upper side.
  EXPECT_NEAR(sol.z_upper[0] - sol.z_lower[0], 4.0, 1e-6);
}

TEST(InteriorPoint, DetectsInfeasibleConstraints) {
  Model m;
  auto x = m.add_variable(-kInfinity, kInfinity, 0.0);
  auto y = m.add_variable(-kInfinity, kInfinity, 0.0);
  Expression f;
  f.add_linear(x, 1.0);
  m.set_objective(f);
  Expression disc;
  disc.add_square(x, 1.0).add_square(y, 1.0);
  m.add_constraint(disc, -kInfinity, 1.0);
  Expression line;
  line.add_linear(x, 1.0).add_linear(y, 1.0);
  m.add_constraint(line, 3.0, kInfinity);
  auto sol = solve(m);
  EXPECT_EQ(sol.status, SolveStatus::Infeasible);
  EXPECT_GT(sol.primal_infeasibility, 0.1);
}

TEST(InteriorPoint, MultistartFindsTheLowerMinimum) {
  // (x^2 - 1)^2 + 0.3 x has local minima near x = 1 and x = -1; the latter is lower.
  Polynomial1d p({1.0, 0.3, -2.0, 0.0, 1.0}, -3.0, 3.0, 2.0);
  auto single = solve(p);
  ASSERT_EQ(single.status, SolveStatus::Optimal);
  EXPECT_GT(single.x[0], 0.5);
  std::vector<std::vector<double>> starts{{2.0}, {-2.0}};
  auto best = multistart_solve(p, starts);
  ASSERT_EQ(best.status, SolveStatus::Optimal);
  EXPECT_LT(best.x[0], -0.5);
  EXPECT_LT(best.objective, single.objective);
}

TEST(InteriorPoint, WarmStartConvergesFaster) {
  Hs071 p;
  auto cold = solve(p);
  ASSERT_TRUE(cold.optimal());
  auto ws = cold.warm_start();
  auto warm = solve(p, {}, &ws);
  ASSERT_TRUE(warm.optimal());
  EXPECT_LT(warm.iterations, cold.iterations);
  EXPECT_NEAR(warm.objective, cold.objective, 1e-7);
}

TEST(InteriorPoint, RejectsBadInputs) {
  Hs071 p;
  WarmStart ws{{1.0, 2.0}, {}, {}, {}};
  EXPECT_THROW(solve(p, {}, &ws), dopf::Error);

  Model m;
  auto x = m.add_variable(-1.0, 1.0, 0.0);
  Expression f;
  f.add_linear(x, std::numeric_limits<double>::quiet_NaN());
  m.set_objective(f);
  try {
    solve(m);
    FAIL() << "expected a callback failure";
  } catch (const dopf::Error& e) {
    EXPECT_EQ(e.kind(), dopf::ErrorKind::CallbackFailure);
  }
}

TEST(Model, DerivativesMatchFiniteDifferences) {
  // Trigonometric products including repeated indices.
  Model m;
  std::vector<Index> v;
  for (int i = 0; i < 5; ++i) v.push_back(m.add_variable(-kInfinity, kInfinity, 0.0));
  Expression f;
  f.add_cos_product(v[0], v[1], v[2], v[3], 1.7).add_sin_product(v[0], v[0], v[3], v[4], -0.4);
  f.add_square(v[4], 2.5).add_product(v[1], v[2], 0.3).add_linear(v[3], 1.1);
  m.set_objective(f);
  Expression c1;
  c1.add_sin_product(v[1], v[2], v[0], v[4], 2.0).add_cos_product(v[3], v[3], v[3], v[1], -1.3);
  m.add_constraint(c1, -1.0, 1.0);
  Expression c2;
  c2.add_cos_product(v[0], v[2], v[0], v[2], 0.9).add_product(v[4], v[4], -0.5).add_sin_product(v[2], v[4], v[4], v[2], 1.0);
  m.add_constraint(c2, 0.0, 0.0);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(5);
    for (auto& xi : x) xi = u(rng);
    std::vector<double> y{u(rng), u(rng)};
    auto check = check_derivatives(m, x, y, 0.7);
    EXPECT_LT(check.gradient, 1e-7);
    EXPECT_LT(check.jacobian, 1e-7);
    EXPECT_LT(check.hessian, 1e-6);
  }
}

TEST(Model, ObjectiveCoefficientUpdateKeepsResults) {
  Model m;
  auto x = m.add_variable(-kInfinity, kInfinity, 0.0);
  Expression f;
  f.add_square(x, 1.0).add_linear(x, -2.0);
  m.set_objective(f);
  EXPECT_NEAR(solve(m).x[0], 1.0, 1e-8);
  Expression g;
  g.add_square(x, 1.0).add_linear(x, 4.0);
  m.set_objective(g);
  EXPECT_NEAR(solve(m).x[0], -2.0, 1e-8);
  Model copy = m;
  EXPECT_NEAR(solve(copy).x[0], -2.0, 1e-8);
}

TEST(Model, RejectsCrossedBoundsAndUnknownVariables) {
  Model m;
  EXPECT_THROW(m.add_variable(1.0, 0.0), dopf::Error);
  auto x = m.add_variable(0.0, 1.0);
  Expression e;
  e.add_linear(x + 3, 1.0);
  EXPECT_THROW(m.add_constraint(e, 0.0, 1.0), dopf::Error);
}

TEST(InteriorPoint, ClippedQuadratic) {
  Model m;
  auto x = m.add_variable(1.0, 2.0, 1.5);
  Expression f;
  f.add_square(x, 1.0).add_linear(x, -6.0).add_constant(9.0);
  m.set_objective(f);
  auto sol = solve(m);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.x[0], 2.0, 1e-8);
  EXPECT_NEAR(sol.objective, 1.0, 1e-8);
}

TEST(InteriorPoint, LinearObjectiveOnCircle) {
  Model m;
  auto x = m.add_variable(-kInfinity, kInfinity, 0.5);
  auto y = m.add_variable(-kInfinity, kInfinity, -0.2);
  Expression f;
  f.add_linear(x, 1.0).add_linear(y, 1.0);
  m.set_objective(f);
  Expression circle;
  circle.add_square(x, 1.0).add_square(y, 1.0);
  m.add_constraint(circle, 1.0, 1.0);
  auto sol = solve(m);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.x[0], -std::sqrt(0.5), 1e-7);
  EXPECT_NEAR(sol.x[1], -std::sqrt(0.5), 1e-7);
  EXPECT_NEAR(sol.objective, -std::sqrt(2.0), 1e-7);
}

TEST(InteriorPoint, QuadraticDerivativesAreExact) {
  Model m;
  auto x = m.add_variable(-kInfinity, kInfinity);
  auto y = m.add_variable(-kInfinity, kInfinity);
  Expression f;
  f.add_square(x, 3.0).add_product(x, y, -1.0).add_square(y, 0.5).add_linear(y, 2.0);
  m.set_objective(f);
  std::vector<double> pt{0.3, -1.2};
  auto check = check_derivatives(m, pt, {}, 1.0, 1e-6);
  EXPECT_LE(check.gradient, 1e-6);
  EXPECT_LE(check.hessian, 1e-6);
}

namespace {

// Hs071 with one Jacobian entry off by 10%.
class CorruptedHs071 final : public NlpProblem {
 public:
  Index num_variables() const override { return base_.num_variables(); }
  Index num_constraints() const override { return base_.num_constraints(); }
  void variable_bounds(std::span<double> lo, std::span<double> hi) const override { base_.variable_bounds(lo, hi); }
  void constraint_bounds(std::span<double> lo, std::span<double> hi) const override { base_.constraint_bounds(lo, hi); }
  void initial_point(std::span<double> x) const override { base_.initial_point(x); }
  double objective(std::span<const double> x) const override { return base_.objective(x); }
  void gradient(std::span<const double> x, std::span<double> g) const override { base_.gradient(x, g); }
  void constraints(std::span<const double> x, std::span<double> c) const override { base_.constraints(x, c); }
  SparsityPattern jacobian_pattern() const override { return base_.jacobian_pattern(); }
  void jacobian(std::span<const double> x, std::span<double> v) const override {
    base_.jacobian(x, v);
    v[5] *= 1.1;
  }
  SparsityPattern hessian_pattern() const override { return base_.hessian_pattern(); }
  void hessian(std::span<const double> x, double sigma, std::span<const double> y, std::span<double> v) const override {
    base_.hessian(x, sigma, y, v);
  }

 private:
  Hs071 base_;
};

}  // namespace

TEST(InteriorPoint, CorruptedJacobianIsDetected) {
  std::vector<double> x{1.2, 4.1, 3.7, 1.6};
  std::vector<double> y{0.4, -0.2};
  EXPECT_LT(check_derivatives(Hs071{}, x, y).jacobian, 1e-6);
  EXPECT_GE(check_derivatives(CorruptedHs071{}, x, y).jacobian, 1e-2);
}

TEST(InteriorPoint, MultistartReachesBothBasins) {
  // max -(x^2 - 1)^2, written as a minimization.
  Polynomial1d p({1.0, 0.0, -2.0, 0.0, 1.0}, -3.0, 3.0, 2.0);
  for (double s : {2.0, -2.0}) {
    std::vector<std::vector<double>> one{{s}};
    auto sol = multistart_solve(p, one);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(sol.x[0], s > 0 ? 1.0 : -1.0, 1e-6);
  }
  std::vector<std::vector<double>> starts{{2.0}, {-2.0}};
  auto best = multistart_solve(p, starts);
  ASSERT_TRUE(best.optimal());
  EXPECT_NEAR(best.objective, 0.0, 1e-10);
  EXPECT_NEAR(std::abs(best.x[0]), 1.0, 1e-6);
}
