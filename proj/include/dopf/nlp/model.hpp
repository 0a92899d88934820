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

// An NlpProblem assembled from a small vocabulary of terms. Every function
// in the power-flow formulations is a sum of
//
//   a * x_i
//   a * x_i * x_j
//   a * x_i * x_j * cos(x_k - x_l)
//   a * x_i * x_j * sin(x_k - x_l)
//
// so gradients, Jacobians and Hessians are generated exactly from the term
// list instead of being written by hand for each formulation.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dopf/nlp/problem.hpp"

namespace dopf::nlp {

enum class TermKind : std::uint8_t { Linear, Product, CosProduct, SinProduct };

struct Term {
  TermKind kind;
  Index a = 0;
  Index b = 0;
  Index c = 0;
  Index d = 0;
  double coef = 0.0;

  bool same_structure(const Term& o) const {
    return kind == o.kind && a == o.a && b == o.b && c == o.c && d == o.d;
  }
};

class Expression {
 public:
  Expression& add_constant(double value) {
    constant += value;
    return *this;
  }
  Expression& add_linear(Index i, double coef) {
    terms.push_back({TermKind::Linear, i, 0, 0, 0, coef});
    return *this;
  }
  Expression& add_product(Index i, Index j, double coef) {
    terms.push_back({TermKind::Product, i, j, 0, 0, coef});
    return *this;
  }
  Expression& add_square(Index i, double coef) { return add_product(i, i, coef); }
  /// coef * x_vi * x_vj * cos(x_ti - x_tj)
  Expression& add_cos_product(Index vi, Index vj, Index ti, Index tj, double coef) {
    terms.push_back({TermKind::CosProduct, vi, vj, ti, tj, coef});
    return *this;
  }
  /// coef * x_vi * x_vj * sin(x_ti - x_tj)
  Expression& add_sin_product(Index vi, Index vj, Index ti, Index tj, double coef) {
    terms.push_back({TermKind::SinProduct, vi, vj, ti, tj, coef});
    return *this;
  }

  double evaluate(std::span<const double> x) const;

  double constant = 0.0;
  std::vector<Term> terms;
};

class Model final : public NlpProblem {
 public:
  Model();
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  ~Model() override;

  Index add_variable(double lower, double upper, double start = 0.0);
  Index add_constraint(Expression expr, double lower, double upper);
  /// Replaces the objective. The compiled derivative structure is reused when
  /// the new objective has the same term layout (only coefficients differ).
  void set_objective(Expression expr);

  void set_variable_bounds(Index i, double lower, double upper);
  void set_constraint_bounds(Index j, double lower, double upper);
  void set_start(Index i, double value) { start_[static_cast<std::size_t>(i)] = value; }
  void set_start(std::span<const double> x);

  const Expression& objective_expression() const { return objective_; }
  const Expression& constraint_expression(Index j) const { return constraints_[static_cast<std::size_t>(j)]; }
  double variable_lower(Index i) const { return xl_[static_cast<std::size_t>(i)]; }
  double variable_upper(Index i) const { return xu_[static_cast<std::size_t>(i)]; }
  double constraint_lower(Index j) const { return cl_[static_cast<std::size_t>(j)]; }
  double constraint_upper(Index j) const { return cu_[static_cast<std::size_t>(j)]; }
  std::span<const double> start() const { return start_; }

  /// Largest bound or constraint violation at x (bounds of constraints
  /// included), in the problem's own units.
  double max_violation(std::span<const double> x) const;

  Index num_variables() const override { return static_cast<Index>(xl_.size()); }
  Index num_constraints() const override { return static_cast<Index>(constraints_.size()); }
  void variable_bounds(std::span<double> lower, std::span<double> upper) const override;
  void constraint_bounds(std::span<double> lower, std::span<double> upper) const override;
  void initial_point(std::span<double> x) const override;
  double objective(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> grad) const override;
  void constraints(std::span<const double> x, std::span<double> values) const override;
  SparsityPattern jacobian_pattern() const override;
  void jacobian(std::span<const double> x, std::span<double> values) const override;
  SparsityPattern hessian_pattern() const override;
  void hessian(std::span<const double> x, double objective_factor, std::span<const double> multipliers,
               std::span<double> values) const override;

 private:
  struct Compiled;
  const Compiled& compiled() const;

  std::vector<double> xl_, xu_, start_;
  std::vector<double> cl_, cu_;
  std::vector<Expression> constraints_;
  Expression objective_;
  mutable std::unique_ptr<Compiled> compiled_;
};

}  // namespace dopf::nlp
