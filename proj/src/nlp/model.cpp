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

#include "dopf/nlp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>

#include "dopf/error.hpp"

namespace dopf::nlp {

namespace {

inline void trig_parts(const Term& t, std::span<const double> x, double& s, double& c) {
  const double angle = x[static_cast<std::size_t>(t.c)] - x[static_cast<std::size_t>(t.d)];
  s = std::sin(angle);
  c = std::cos(angle);
}

inline double term_value(const Term& t, std::span<const double> x) {
  const auto xa = x[static_cast<std::size_t>(t.a)];
  switch (t.kind) {
    case TermKind::Linear:
      return t.coef * xa;
    case TermKind::Product:
      return t.coef * xa * x[static_cast<std::size_t>(t.b)];
    case TermKind::CosProduct: {
      double s, c;
      trig_parts(t, x, s, c);
      return t.coef * xa * x[static_cast<std::size_t>(t.b)] * c;
    }
    case TermKind::SinProduct: {
      double s, c;
      trig_parts(t, x, s, c);
      return t.coef * xa * x[static_cast<std::size_t>(t.b)] * s;
    }
  }
  return 0.0;
}

// Number of distinct argument slots a term uses.
inline int slot_count(TermKind k) {
  switch (k) {
    case TermKind::Linear:
      return 1;
    case TermKind::Product:
      return 2;
    default:
      return 4;
  }
}

// Hessian entries per term. Products use one (a, b); trigonometric products
// use (a,b) (a,c) (a,d) (b,c) (b,d) (c,d) (c,c) (d,d).
inline int hessian_slot_count(TermKind k) {
  switch (k) {
    case TermKind::Linear:
      return 0;
    case TermKind::Product:
      return 1;
    default:
      return 8;
  }
}

inline Index term_arg(const Term& t, int slot) {
  switch (slot) {
    case 0:
      return t.a;
    case 1:
      return t.b;
    case 2:
      return t.c;
    default:
      return t.d;
  }
}

constexpr int kTrigPairs[8][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}, {2, 2}, {3, 3}};

bool same_layout(const Expression& a, const Expression& b) {
  if (a.terms.size() != b.terms.size()) return false;
  for (std::size_t k = 0; k < a.terms.size(); ++k) {
    if (!a.terms[k].same_structure(b.terms[k])) return false;
  }
  return true;
}

}  // namespace

double Expression::evaluate(std::span<const double> x) const {
  double sum = constant;
  for (const auto& t : terms) sum += term_value(t, x);
  return sum;
}

// Slot tables: for term k of an expression, jacobian slots live at
// jac_slot[jac_offset[k] .. +slot_count] and Hessian slots at
// hess_slot[hess_offset[k] .. +hessian_slot_count] with a multiplicity
// factor (2 when an off-diagonal pair collapses onto the diagonal).
struct Model::Compiled {
  struct ExprSlots {
    std::vector<std::int32_t> jac_offset;
    std::vector<std::int32_t> hess_offset;
    std::vector<std::int32_t> jac_slot;
    std::vector<std::int32_t> hess_slot;
    std::vector<double> hess_factor;
  };

  SparsityPattern jac;
  SparsityPattern hess;
  ExprSlots objective;
  std::vector<ExprSlots> rows;
};

Model::Model(const Model& other)
    : xl_(other.xl_),
      xu_(other.xu_),
      start_(other.start_),
      cl_(other.cl_),
      cu_(other.cu_),
      constraints_(other.constraints_),
      objective_(other.objective_),
      compiled_(other.compiled_ ? std::make_unique<Compiled>(*other.compiled_) : nullptr) {}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Model::Model() = default;
Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Index Model::add_variable(double lower, double upper, double start) {
  if (lower > upper) throw Error(ErrorKind::CrossedBounds, "variable lower bound exceeds upper bound");
  xl_.push_back(lower);
  xu_.push_back(upper);
  start_.push_back(start);
  compiled_.reset();
  return static_cast<Index>(xl_.size() - 1);
}

Index Model::add_constraint(Expression expr, double lower, double upper) {
  if (lower > upper) throw Error(ErrorKind::CrossedBounds, "constraint lower bound exceeds upper bound");
  const auto n = num_variables();
  for (const auto& t : expr.terms) {
    for (int s = 0; s < slot_count(t.kind); ++s) {
      const auto v = term_arg(t, s);
      if (v < 0 || v >= n) throw Error(ErrorKind::DimensionMismatch, "expression refers to an unknown variable");
    }
  }
  constraints_.push_back(std::move(expr));
  cl_.push_back(lower);
  cu_.push_back(upper);
  compiled_.reset();
  return static_cast<Index>(constraints_.size() - 1);
}

void Model::set_objective(Expression expr) {
  const auto n = num_variables();
  for (const auto& t : expr.terms) {
    for (int s = 0; s < slot_count(t.kind); ++s) {
      const auto v = term_arg(t, s);
      if (v < 0 || v >= n) throw Error(ErrorKind::DimensionMismatch, "objective refers to an unknown variable");
    }
  }
  if (!same_layout(objective_, expr)) compiled_.reset();
  objective_ = std::move(expr);
}

void Model::set_variable_bounds(Index i, double lower, double upper) {
  if (lower > upper) throw Error(ErrorKind::CrossedBounds, "variable lower bound exceeds upper bound");
  xl_.at(static_cast<std::size_t>(i)) = lower;
  xu_.at(static_cast<std::size_t>(i)) = upper;
}

void Model::set_constraint_bounds(Index j, double lower, double upper) {
  if (lower > upper) throw Error(ErrorKind::CrossedBounds, "constraint lower bound exceeds upper bound");
  cl_.at(static_cast<std::size_t>(j)) = lower;
  cu_.at(static_cast<std::size_t>(j)) = upper;
}

void Model::set_start(std::span<const double> x) {
  if (x.size() != start_.size()) throw Error(ErrorKind::DimensionMismatch, "start vector has the wrong length");
  std::copy(x.begin(), x.end(), start_.begin());
}

double Model::max_violation(std::span<const double> x) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < xl_.size(); ++i) {
    worst = std::max({worst, xl_[i] - x[i], x[i] - xu_[i]});
  }
  for (std::size_t j = 0; j < constraints_.size(); ++j) {
    const double v = constraints_[j].evaluate(x);
    worst = std::max({worst, cl_[j] - v, v - cu_[j]});
  }
  return worst;
}

void Model::variable_bounds(std::span<double> lower, std::span<double> upper) const {
  std::copy(xl_.begin(), xl_.end(), lower.begin());
  std::copy(xu_.begin(), xu_.end(), upper.begin());
}

void Model::constraint_bounds(std::span<double> lower, std::span<double> upper) const {
  std::copy(cl_.begin(), cl_.end(), lower.begin());
  std::copy(cu_.begin(), cu_.end(), upper.begin());
}

void Model::initial_point(std::span<double> x) const { std::copy(start_.begin(), start_.end(), x.begin()); }

double Model::objective(std::span<const double> x) const { return objective_.evaluate(x); }

namespace {

// Accumulates partial derivatives of term t (scaled by w) into out[slot].
template <typename Sink>
inline void term_gradient(const Term& t, std::span<const double> x, double w, Sink&& sink) {
  const double cw = t.coef * w;
  switch (t.kind) {
    case TermKind::Linear:
      sink(0, cw);
      return;
    case TermKind::Product:
      sink(0, cw * x[static_cast<std::size_t>(t.b)]);
      sink(1, cw * x[static_cast<std::size_t>(t.a)]);
      return;
    case TermKind::CosProduct:
    case TermKind::SinProduct: {
      double s, c;
      trig_parts(t, x, s, c);
      // f = cw xa xb T(angle); T' = D
      const double T = t.kind == TermKind::CosProduct ? c : s;
      const double D = t.kind == TermKind::CosProduct ? -s : c;
      const double xa = x[static_cast<std::size_t>(t.a)];
      const double xb = x[static_cast<std::size_t>(t.b)];
      sink(0, cw * xb * T);
      sink(1, cw * xa * T);
      sink(2, cw * xa * xb * D);
      sink(3, -cw * xa * xb * D);
      return;
    }
  }
}

// Second derivatives in the slot order used by hessian_slot_count.
inline void term_hessian(const Term& t, std::span<const double> x, double w, double* out) {
  const double cw = t.coef * w;
  switch (t.kind) {
    case TermKind::Linear:
      return;
    case TermKind::Product:
      out[0] = cw;
      return;
    case TermKind::CosProduct:
    case TermKind::SinProduct: {
      double s, c;
      trig_parts(t, x, s, c);
      const double T = t.kind == TermKind::CosProduct ? c : s;
      const double D = t.kind == TermKind::CosProduct ? -s : c;
      const double E = -T;
      const double xa = x[static_cast<std::size_t>(t.a)];
      const double xb = x[static_cast<std::size_t>(t.b)];
      out[0] = cw * T;             // (a,b)
      out[1] = cw * xb * D;        // (a,c)
      out[2] = -cw * xb * D;       // (a,d)
      out[3] = cw * xa * D;        // (b,c)
      out[4] = -cw * xa * D;       // (b,d)
      out[5] = -cw * xa * xb * E;  // (c,d)
      out[6] = cw * xa * xb * E;   // (c,c)
      out[7] = cw * xa * xb * E;   // (d,d)
      return;
    }
  }
}

}  // namespace

void Model::gradient(std::span<const double> x, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  for (const auto& t : objective_.terms) {
    term_gradient(t, x, 1.0, [&](int slot, double v) { grad[static_cast<std::size_t>(term_arg(t, slot))] += v; });
  }
}

void Model::constraints(std::span<const double> x, std::span<double> values) const {
  for (std::size_t j = 0; j < constraints_.size(); ++j) values[j] = constraints_[j].evaluate(x);
}

const Model::Compiled& Model::compiled() const {
  if (compiled_) return *compiled_;
  auto out = std::make_unique<Compiled>();

  // Hessian pattern is shared by the objective and all rows.
  std::map<std::pair<Index, Index>, std::int32_t> hess_index;
  auto hess_entry = [&](Index r, Index c) {
    if (r < c) std::swap(r, c);
    auto [it, inserted] = hess_index.try_emplace({r, c}, static_cast<std::int32_t>(out->hess.rows.size()));
    if (inserted) {
      out->hess.rows.push_back(r);
      out->hess.cols.push_back(c);
    }
    return it->second;
  };

  auto compile_hessian = [&](const Expression& e, Compiled::ExprSlots& slots) {
    slots.hess_offset.reserve(e.terms.size());
    for (const auto& t : e.terms) {
      slots.hess_offset.push_back(static_cast<std::int32_t>(slots.hess_slot.size()));
      if (t.kind == TermKind::Product) {
        slots.hess_slot.push_back(hess_entry(t.a, t.b));
        slots.hess_factor.push_back(t.a == t.b ? 2.0 : 1.0);
      } else if (t.kind != TermKind::Linear) {
        for (int k = 0; k < 8; ++k) {
          const Index r = term_arg(t, kTrigPairs[k][0]);
          const Index c = term_arg(t, kTrigPairs[k][1]);
          const bool diagonal_pair = kTrigPairs[k][0] == kTrigPairs[k][1];
          slots.hess_slot.push_back(hess_entry(r, c));
          slots.hess_factor.push_back(!diagonal_pair && r == c ? 2.0 : 1.0);
        }
      }
    }
  };

  compile_hessian(objective_, out->objective);

  out->rows.resize(constraints_.size());
  for (std::size_t j = 0; j < constraints_.size(); ++j) {
    const auto& e = constraints_[j];
    auto& slots = out->rows[j];
    std::map<Index, std::int32_t> column;  // variable -> jacobian entry
    for (const auto& t : e.terms) {
      for (int s = 0; s < slot_count(t.kind); ++s) column.try_emplace(term_arg(t, s), 0);
    }
    for (auto& [var, pos] : column) {
      pos = static_cast<std::int32_t>(out->jac.rows.size());
      out->jac.rows.push_back(static_cast<Index>(j));
      out->jac.cols.push_back(var);
    }
    slots.jac_offset.reserve(e.terms.size());
    for (const auto& t : e.terms) {
      slots.jac_offset.push_back(static_cast<std::int32_t>(slots.jac_slot.size()));
      for (int s = 0; s < slot_count(t.kind); ++s) slots.jac_slot.push_back(column[term_arg(t, s)]);
    }
    compile_hessian(e, slots);
  }

  compiled_ = std::move(out);
  return *compiled_;
}

SparsityPattern Model::jacobian_pattern() const { return compiled().jac; }

void Model::jacobian(std::span<const double> x, std::span<double> values) const {
  const auto& comp = compiled();
  std::fill(values.begin(), values.end(), 0.0);
  for (std::size_t j = 0; j < constraints_.size(); ++j) {
    const auto& slots = comp.rows[j];
    const auto& terms = constraints_[j].terms;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto* slot = &slots.jac_slot[static_cast<std::size_t>(slots.jac_offset[k])];
      term_gradient(terms[k], x, 1.0,
                    [&](int s, double v) { values[static_cast<std::size_t>(slot[s])] += v; });
    }
  }
}

SparsityPattern Model::hessian_pattern() const { return compiled().hess; }

void Model::hessian(std::span<const double> x, double objective_factor, std::span<const double> multipliers,
                    std::span<double> values) const {
  const auto& comp = compiled();
  std::fill(values.begin(), values.end(), 0.0);
  double buf[8];
  auto add_expr = [&](const Expression& e, const Compiled::ExprSlots& slots, double w) {
    if (w == 0.0) return;
    for (std::size_t k = 0; k < e.terms.size(); ++k) {
      const auto& t = e.terms[k];
      const int count = hessian_slot_count(t.kind);
      if (count == 0) continue;
      term_hessian(t, x, w, buf);
      const auto off = static_cast<std::size_t>(slots.hess_offset[k]);
      for (int s = 0; s < count; ++s) {
        values[static_cast<std::size_t>(slots.hess_slot[off + static_cast<std::size_t>(s)])] +=
            slots.hess_factor[off + static_cast<std::size_t>(s)] * buf[s];
      }
    }
  };
  add_expr(objective_, comp.objective, objective_factor);
  for (std::size_t j = 0; j < constraints_.size(); ++j) add_expr(constraints_[j], comp.rows[j], multipliers[j]);
}

}  // namespace dopf::nlp
