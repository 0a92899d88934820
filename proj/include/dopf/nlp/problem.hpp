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

#pragma once

#include <limits>
#include <span>
#include <vector>

namespace dopf::nlp {

using Index = int;

/// Bounds at or beyond this magnitude are treated as infinite.
inline constexpr double kInfinity = 1e19;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Coordinate-format sparsity. Duplicate (row, col) pairs are allowed; their
/// values are summed.
struct SparsityPattern {
  std::vector<Index> rows;
  std::vector<Index> cols;

  std::size_t size() const { return rows.size(); }
};

/// A smooth nonlinear program
///
///   min f(x)  s.t.  cl <= c(x) <= cu,  xl <= x <= xu
///
/// with first and second derivatives supplied by the implementation.
/// Constraints with cl == cu are equalities. The Hessian pattern covers the
/// lower triangle (row >= col) of the Lagrangian Hessian.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual Index num_variables() const = 0;
  virtual Index num_constraints() const = 0;

  virtual void variable_bounds(std::span<double> lower, std::span<double> upper) const = 0;
  virtual void constraint_bounds(std::span<double> lower, std::span<double> upper) const = 0;
  virtual void initial_point(std::span<double> x) const = 0;

  virtual double objective(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual void constraints(std::span<const double> x, std::span<double> values) const = 0;

  virtual SparsityPattern jacobian_pattern() const = 0;
  virtual void jacobian(std::span<const double> x, std::span<double> values) const = 0;

  virtual SparsityPattern hessian_pattern() const = 0;
  /// Values of  objective_factor * H_f(x) + sum_j multipliers[j] * H_cj(x).
  virtual void hessian(std::span<const double> x, double objective_factor,
                       std::span<const double> multipliers, std::span<double> values) const = 0;
};

}  // namespace dopf::nlp
