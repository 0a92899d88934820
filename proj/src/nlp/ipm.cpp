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

// Inequality rows get a slack s with  c(x) - s = 0,  cl <= s <= cu, so the
// barrier subproblem only sees bounds on the primal vector w = (x, s).
// Variables with equal bounds are frozen and carry an identity row in the
// KKT matrix. Symmetric indefinite systems are factored with a sparse LDL^T
// (no pivoting); the constraint block is regularized by a tiny -delta_c and
// the result refined against the unregularized matrix.

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <optional>
#include <cstdio>
#include <limits>
#include <ostream>
#include <utility>

#include "dopf/error.hpp"
#include "dopf/nlp/solver.hpp"

namespace dopf::nlp {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::MaxIterations:
      return "max_iterations";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::NumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Eigen::Index;

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Algorithm constants.
constexpr double kKappaEps = 10.0;
constexpr double kKappaMu = 0.2;
constexpr double kThetaMu = 1.5;
constexpr double kTauMin = 0.99;
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kGammaAlpha = 0.05;
constexpr double kDelta = 1.0;
constexpr double kSTheta = 1.1;
constexpr double kSPhi = 2.3;
constexpr double kEta = 1e-8;
constexpr double kKappaSoc = 0.99;
constexpr int kMaxSoc = 4;
constexpr double kKappaSigma = 1e10;
constexpr double kKappaD = 1e-5;
constexpr double kSMax = 100.0;
constexpr double kDeltaW0 = 1e-4;
constexpr double kDeltaWMin = 1e-20;
constexpr double kDeltaWMax = 1e40;
constexpr double kKappaWPlus = 8.0;
constexpr double kKappaWPlusFirst = 100.0;
constexpr double kKappaWMinus = 1.0 / 3.0;
constexpr double kDeltaC = 1e-9;
constexpr double kRestorationRho = 1000.0;
constexpr int kMaxRestorations = 5;

bool finite_bound(double v) { return std::abs(v) < kInfinity; }

std::span<const double> head(const Vec& v, Index n) { return {v.data(), static_cast<std::size_t>(n)}; }

double max_abs(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Feasibility problem used when the line search stalls:
//   min  rho * sum(p + n) + zeta/2 * ||D (x - x_ref)||^2
//   s.t. cl <= scale * c(x) - p + n <= cu,  p, n >= 0
class RestorationProblem final : public NlpProblem {
 public:
  RestorationProblem(const NlpProblem& base, std::vector<double> row_scale, std::vector<double> reference,
                     double zeta, double mu)
      : base_(base), scale_(std::move(row_scale)), ref_(std::move(reference)), zeta_(zeta) {
    n_ = base.num_variables();
    m_ = base.num_constraints();
    xl_.resize(static_cast<std::size_t>(n_));
    xu_.resize(static_cast<std::size_t>(n_));
    cl_.resize(static_cast<std::size_t>(m_));
    cu_.resize(static_cast<std::size_t>(m_));
    base.variable_bounds(xl_, xu_);
    base.constraint_bounds(cl_, cu_);
    for (std::size_t j = 0; j < cl_.size(); ++j) {
      if (finite_bound(cl_[j])) cl_[j] *= scale_[j];
      if (finite_bound(cu_[j])) cu_[j] *= scale_[j];
    }
    weight_.resize(static_cast<std::size_t>(n_));
    for (std::size_t i = 0; i < weight_.size(); ++i) {
      const double d = std::min(1.0, 1.0 / std::max(std::abs(ref_[i]), kEps));
      weight_[i] = d * d;
    }
    base_jac_ = base.jacobian_pattern();
    base_hess_ = base.hessian_pattern();

    start_.assign(static_cast<std::size_t>(n_ + 2 * m_), 0.0);
    std::copy(ref_.begin(), ref_.end(), start_.begin());
    std::vector<double> c(static_cast<std::size_t>(m_));
    base.constraints(ref_, c);
    const double rho = kRestorationRho;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double v = scale_[j] * c[j];
      double r = 0.0;
      if (v < cl_[j]) r = v - cl_[j];
      if (v > cu_[j]) r = v - cu_[j];
      const double a = (mu - rho * r) / (2.0 * rho);
      const double nn = a + std::sqrt(a * a + mu * r / (2.0 * rho));
      start_[static_cast<std::size_t>(n_) + j] = r + nn;
      start_[static_cast<std::size_t>(n_ + m_) + j] = nn;
    }
  }

  ::dopf::nlp::Index num_variables() const override { return static_cast<int>(n_ + 2 * m_); }
  ::dopf::nlp::Index num_constraints() const override { return static_cast<int>(m_); }

  void variable_bounds(std::span<double> lower, std::span<double> upper) const override {
    std::copy(xl_.begin(), xl_.end(), lower.begin());
    std::copy(xu_.begin(), xu_.end(), upper.begin());
    std::fill(lower.begin() + n_, lower.end(), 0.0);
    std::fill(upper.begin() + n_, upper.end(), kInfinity);
  }
  void constraint_bounds(std::span<double> lower, std::span<double> upper) const override {
    std::copy(cl_.begin(), cl_.end(), lower.begin());
    std::copy(cu_.begin(), cu_.end(), upper.begin());
  }
  void initial_point(std::span<double> x) const override { std::copy(start_.begin(), start_.end(), x.begin()); }

  double objective(std::span<const double> x) const override {
    double pen = 0.0;
    for (Index k = n_; k < n_ + 2 * m_; ++k) pen += x[static_cast<std::size_t>(k)];
    double prox = 0.0;
    for (std::size_t i = 0; i < ref_.size(); ++i) prox += weight_[i] * (x[i] - ref_[i]) * (x[i] - ref_[i]);
    return kRestorationRho * pen + 0.5 * zeta_ * prox;
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    for (std::size_t i = 0; i < ref_.size(); ++i) g[i] = zeta_ * weight_[i] * (x[i] - ref_[i]);
    std::fill(g.begin() + n_, g.end(), kRestorationRho);
  }
  void constraints(std::span<const double> x, std::span<double> values) const override {
    base_.constraints(x.first(static_cast<std::size_t>(n_)), values);
    for (Index j = 0; j < m_; ++j) {
      const auto js = static_cast<std::size_t>(j);
      values[js] = scale_[js] * values[js] - x[static_cast<std::size_t>(n_ + j)] + x[static_cast<std::size_t>(n_ + m_ + j)];
    }
  }
  SparsityPattern jacobian_pattern() const override {
    SparsityPattern p = base_jac_;
    for (Index j = 0; j < m_; ++j) {
      p.rows.push_back(static_cast<int>(j));
      p.cols.push_back(static_cast<int>(n_ + j));
      p.rows.push_back(static_cast<int>(j));
      p.cols.push_back(static_cast<int>(n_ + m_ + j));
    }
    return p;
  }
  void jacobian(std::span<const double> x, std::span<double> values) const override {
    const auto nnz = base_jac_.size();
    base_.jacobian(x.first(static_cast<std::size_t>(n_)), values.first(nnz));
    for (std::size_t k = 0; k < nnz; ++k) values[k] *= scale_[static_cast<std::size_t>(base_jac_.rows[k])];
    for (Index j = 0; j < m_; ++j) {
      values[nnz + 2 * static_cast<std::size_t>(j)] = -1.0;
      values[nnz + 2 * static_cast<std::size_t>(j) + 1] = 1.0;
    }
  }
  SparsityPattern hessian_pattern() const override {
    SparsityPattern p = base_hess_;
    for (Index i = 0; i < n_; ++i) {
      p.rows.push_back(static_cast<int>(i));
      p.cols.push_back(static_cast<int>(i));
    }
    return p;
  }
  void hessian(std::span<const double> x, double objective_factor, std::span<const double> multipliers,
               std::span<double> values) const override {
    std::vector<double> scaled(multipliers.begin(), multipliers.end());
    for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] *= scale_[j];
    const auto nnz = base_hess_.size();
    base_.hessian(x.first(static_cast<std::size_t>(n_)), 0.0, scaled, values.first(nnz));
    for (std::size_t i = 0; i < weight_.size(); ++i) values[nnz + i] = objective_factor * zeta_ * weight_[i];
  }

 private:
  const NlpProblem& base_;
  std::vector<double> scale_;
  std::vector<double> ref_;
  double zeta_;
  Index n_ = 0;
  Index m_ = 0;
  std::vector<double> xl_, xu_, cl_, cu_, weight_, start_;
  SparsityPattern base_jac_, base_hess_;
};

struct Filter {
  std::vector<std::pair<double, double>> entries;

  bool acceptable(double theta, double phi) const {
    for (const auto& [t, p] : entries) {
      if (theta >= t && phi >= p) return false;
    }
    return true;
  }
  void add(double theta, double phi) {
    std::erase_if(entries, [&](const auto& e) { return e.first >= theta && e.second >= phi; });
    entries.emplace_back(theta, phi);
  }
};

class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& problem, const SolverOptions& options) : prob_(problem), opt_(options) {}

  NlpSolution run(const WarmStart* start);

 private:
  void setup(const WarmStart* start);
  void compute_scaling();
  void build_kkt_structure();
  void push_interior(Vec& w, double push) const;

  bool evaluate(const Vec& w, double& f, Vec& cres, std::vector<double>& craw) const;
  void evaluate_derivatives();
  double barrier(const Vec& w, double f) const;
  Vec barrier_gradient() const;
  Vec jacobian_transpose_times(const Vec& y) const;
  Vec dual_residual() const;
  double complementarity(double mu) const;
  double scaled_error(double mu) const;
  double dual_scale() const;
  double compl_scale() const;
  double unscaled_violation(std::span<const double> x, const std::vector<double>& craw) const;

  void assemble(bool with_hessian, double delta_w, double delta_c, const Vec& sigma);
  bool factorize_with_inertia(const Vec& sigma);
  Vec solve_kkt(const Vec& rhs);
  void direction_from(const Vec& rhs, Vec& dw, Vec& dy);
  void bound_duals_step(const Vec& dw, Vec& dzl, Vec& dzu) const;
  double primal_step_limit(const Vec& dw, double tau) const;
  double dual_step_limit(const Vec& dzl, const Vec& dzu, double tau) const;
  void initialize_multipliers_least_squares();
  void safeguard_bound_duals();

  enum class RestoreResult { Restored, Infeasible, Failed };
  RestoreResult restore();
  void reset_after_restoration(std::span<const double> x);

  NlpSolution finish(SolveStatus status, int iterations);

  const NlpProblem& prob_;
  SolverOptions opt_;

  Index n_ = 0, m_ = 0, ns_ = 0, N_ = 0;
  std::vector<double> xl_, xu_, cl_, cu_;
  std::vector<int> slack_of_row_;  // -1 for equality rows
  std::vector<int> row_of_slack_;
  std::vector<char> fixed_, has_l_, has_u_;
  Vec wl_, wu_;
  double obj_scale_ = 1.0;
  std::vector<double> row_scale_;

  SparsityPattern jac_, hess_;
  std::vector<double> jvals_, hvals_;

  SpMat kkt_;
  std::vector<Index> diag_slot_, hess_slot_, jac_slot_, slack_slot_, cdiag_slot_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  double delta_w_last_ = 0.0;
  double delta_w_ = 0.0;
  double delta_c_ = 0.0;

  // Iterate and cached evaluations.
  Vec w_, y_, zl_, zu_;
  double f_ = 0.0;
  Vec cres_;
  std::vector<double> craw_;
  std::vector<double> grad_;
  double mu_ = 0.1;
  double tau_ = 0.99;
  bool warm_duals_ = false;
  int restorations_ = 0;
};

void InteriorPoint::setup(const WarmStart* start) {
  n_ = prob_.num_variables();
  m_ = prob_.num_constraints();
  if (n_ < 0 || m_ < 0) throw Error(ErrorKind::DimensionMismatch, "negative problem dimensions");
  const auto n = static_cast<std::size_t>(n_);
  const auto m = static_cast<std::size_t>(m_);
  xl_.resize(n);
  xu_.resize(n);
  cl_.resize(m);
  cu_.resize(m);
  prob_.variable_bounds(xl_, xu_);
  prob_.constraint_bounds(cl_, cu_);
  for (std::size_t i = 0; i < n; ++i) {
    if (xl_[i] > xu_[i]) throw Error(ErrorKind::CrossedBounds, "variable bounds cross");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (cl_[j] > cu_[j]) throw Error(ErrorKind::CrossedBounds, "constraint bounds cross");
  }

  slack_of_row_.assign(m, -1);
  row_of_slack_.clear();
  for (std::size_t j = 0; j < m; ++j) {
    if (cl_[j] != cu_[j]) {
      slack_of_row_[j] = static_cast<int>(row_of_slack_.size());
      row_of_slack_.push_back(static_cast<int>(j));
    }
  }
  ns_ = static_cast<Index>(row_of_slack_.size());
  N_ = n_ + ns_;

  jac_ = prob_.jacobian_pattern();
  hess_ = prob_.hessian_pattern();
  if (jac_.rows.size() != jac_.cols.size() || hess_.rows.size() != hess_.cols.size()) {
    throw Error(ErrorKind::DimensionMismatch, "sparsity pattern arrays differ in length");
  }
  for (std::size_t k = 0; k < jac_.size(); ++k) {
    if (jac_.rows[k] < 0 || jac_.rows[k] >= m_ || jac_.cols[k] < 0 || jac_.cols[k] >= n_) {
      throw Error(ErrorKind::DimensionMismatch, "jacobian entry out of range");
    }
  }
  for (std::size_t k = 0; k < hess_.size(); ++k) {
    if (hess_.rows[k] < 0 || hess_.rows[k] >= n_ || hess_.cols[k] < 0 || hess_.cols[k] >= n_) {
      throw Error(ErrorKind::DimensionMismatch, "hessian entry out of range");
    }
  }
  jvals_.assign(jac_.size(), 0.0);
  hvals_.assign(hess_.size(), 0.0);
  grad_.assign(n, 0.0);
  craw_.assign(m, 0.0);

  // Starting point.
  std::vector<double> x0(n);
  if (start != nullptr && !start->x.empty()) {
    if (start->x.size() != n) throw Error(ErrorKind::DimensionMismatch, "warm start has the wrong length");
    x0 = start->x;
  } else {
    prob_.initial_point(x0);
  }
  fixed_.assign(static_cast<std::size_t>(N_), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (xl_[i] == xu_[i]) {
      fixed_[i] = 1;
      x0[i] = xl_[i];
    }
  }

  warm_duals_ = start != nullptr && start->y.size() == m && start->z_lower.size() == n && start->z_upper.size() == n;
  mu_ = warm_duals_ ? opt_.warm_mu_init : opt_.mu_init;
  tau_ = std::max(kTauMin, 1.0 - mu_);
  const double push = warm_duals_ ? opt_.warm_bound_push : opt_.bound_push;

  for (double v : x0) {
    if (!std::isfinite(v)) throw Error(ErrorKind::CallbackFailure, "starting point is not finite");
  }
  // Scaling uses derivatives at the unpushed start.
  {
    Vec tmp = Eigen::Map<const Vec>(x0.data(), n_);
    w_ = Vec::Zero(N_);
    w_.head(n_) = tmp;
  }
  compute_scaling();

  // Bounds of w.
  wl_.resize(N_);
  wu_.resize(N_);
  has_l_.assign(static_cast<std::size_t>(N_), 0);
  has_u_.assign(static_cast<std::size_t>(N_), 0);
  auto set_bounds = [&](Index i, double lo, double hi, bool fixed) {
    const auto is = static_cast<std::size_t>(i);
    has_l_[is] = !fixed && finite_bound(lo);
    has_u_[is] = !fixed && finite_bound(hi);
    wl_[i] = has_l_[is] ? lo - opt_.bound_relax * std::max(1.0, std::abs(lo)) : -kInf;
    wu_[i] = has_u_[is] ? hi + opt_.bound_relax * std::max(1.0, std::abs(hi)) : kInf;
    if (fixed) {
      wl_[i] = lo;
      wu_[i] = hi;
    }
  };
  for (Index i = 0; i < n_; ++i) {
    set_bounds(i, xl_[static_cast<std::size_t>(i)], xu_[static_cast<std::size_t>(i)], fixed_[static_cast<std::size_t>(i)]);
  }
  for (Index k = 0; k < ns_; ++k) {
    const auto j = static_cast<std::size_t>(row_of_slack_[static_cast<std::size_t>(k)]);
    const double s = row_scale_[j];
    set_bounds(n_ + k, finite_bound(cl_[j]) ? s * cl_[j] : -kInfinity, finite_bound(cu_[j]) ? s * cu_[j] : kInfinity,
               false);
  }

  // Push x inside, evaluate, then set and push slacks.
  push_interior(w_, push);
  {
    std::vector<double> c(m);
    prob_.constraints(head(w_, n_), c);
    for (Index k = 0; k < ns_; ++k) {
      const auto j = static_cast<std::size_t>(row_of_slack_[static_cast<std::size_t>(k)]);
      w_[n_ + k] = row_scale_[j] * c[j];
    }
  }
  push_interior(w_, push);

  cres_.resize(m_);
  if (!evaluate(w_, f_, cres_, craw_)) {
    throw Error(ErrorKind::CallbackFailure, "problem functions are not finite at the starting point");
  }
  evaluate_derivatives();
  for (double g : grad_) {
    if (!std::isfinite(g)) throw Error(ErrorKind::CallbackFailure, "gradient is not finite at the starting point");
  }
  for (double v : jvals_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::CallbackFailure, "jacobian is not finite at the starting point");
  }

  build_kkt_structure();

  // Multipliers.
  zl_ = Vec::Zero(N_);
  zu_ = Vec::Zero(N_);
  y_ = Vec::Zero(m_);
  if (warm_duals_) {
    for (Index j = 0; j < m_; ++j) {
      y_[j] = start->y[static_cast<std::size_t>(j)] * obj_scale_ / row_scale_[static_cast<std::size_t>(j)];
    }
    const double floor = mu_;
    for (Index i = 0; i < n_; ++i) {
      const auto is = static_cast<std::size_t>(i);
      if (has_l_[is]) zl_[i] = std::max(start->z_lower[is] * obj_scale_, floor);
      if (has_u_[is]) zu_[i] = std::max(start->z_upper[is] * obj_scale_, floor);
    }
    for (Index k = 0; k < ns_; ++k) {
      const auto is = static_cast<std::size_t>(n_ + k);
      const double yj = y_[row_of_slack_[static_cast<std::size_t>(k)]];
      if (has_l_[is]) zl_[n_ + k] = std::max(-yj, floor);
      if (has_u_[is]) zu_[n_ + k] = std::max(yj, floor);
    }
  } else {
    for (Index i = 0; i < N_; ++i) {
      if (has_l_[static_cast<std::size_t>(i)]) zl_[i] = 1.0;
      if (has_u_[static_cast<std::size_t>(i)]) zu_[i] = 1.0;
    }
    initialize_multipliers_least_squares();
  }
}

void InteriorPoint::compute_scaling() {
  obj_scale_ = 1.0;
  row_scale_.assign(static_cast<std::size_t>(m_), 1.0);
  if (opt_.max_gradient <= 0.0) return;
  const auto x = head(w_, n_);
  prob_.gradient(x, grad_);
  double gmax = 0.0;
  for (double g : grad_) gmax = std::max(gmax, std::abs(g));
  if (!std::isfinite(gmax)) throw Error(ErrorKind::CallbackFailure, "gradient is not finite at the starting point");
  if (gmax > opt_.max_gradient) obj_scale_ = std::max(1e-8, opt_.max_gradient / gmax);
  prob_.jacobian(x, jvals_);
  std::vector<double> rmax(static_cast<std::size_t>(m_), 0.0);
  for (std::size_t k = 0; k < jac_.size(); ++k) {
    auto& r = rmax[static_cast<std::size_t>(jac_.rows[k])];
    r = std::max(r, std::abs(jvals_[k]));
  }
  for (std::size_t j = 0; j < rmax.size(); ++j) {
    if (!std::isfinite(rmax[j])) throw Error(ErrorKind::CallbackFailure, "jacobian is not finite at the starting point");
    if (rmax[j] > opt_.max_gradient) row_scale_[j] = std::max(1e-8, opt_.max_gradient / rmax[j]);
  }
}

void InteriorPoint::push_interior(Vec& w, double push) const {
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (fixed_[is]) continue;
    const bool lo = has_l_[is], hi = has_u_[is];
    if (lo && hi) {
      const double width = wu_[i] - wl_[i];
      const double pl = std::min(push * std::max(1.0, std::abs(wl_[i])), push * width);
      const double pu = std::min(push * std::max(1.0, std::abs(wu_[i])), push * width);
      w[i] = std::min(std::max(w[i], wl_[i] + pl), wu_[i] - pu);
    } else if (lo) {
      w[i] = std::max(w[i], wl_[i] + push * std::max(1.0, std::abs(wl_[i])));
    } else if (hi) {
      w[i] = std::min(w[i], wu_[i] - push * std::max(1.0, std::abs(wu_[i])));
    }
  }
}

bool InteriorPoint::evaluate(const Vec& w, double& f, Vec& cres, std::vector<double>& craw) const {
  const auto x = head(w, n_);
  f = prob_.objective(x);
  if (!std::isfinite(f)) return false;
  prob_.constraints(x, craw);
  for (Index j = 0; j < m_; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const double c = craw[js];
    if (!std::isfinite(c)) return false;
    const int k = slack_of_row_[js];
    cres[j] = k < 0 ? row_scale_[js] * (c - cl_[js]) : row_scale_[js] * c - w[n_ + k];
  }
  return true;
}

void InteriorPoint::evaluate_derivatives() {
  const auto x = head(w_, n_);
  prob_.gradient(x, grad_);
  prob_.jacobian(x, jvals_);
}

double InteriorPoint::barrier(const Vec& w, double f) const {
  double phi = obj_scale_ * f;
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (has_l_[is]) {
      const double sl = w[i] - wl_[i];
      phi -= mu_ * std::log(sl);
      if (!has_u_[is]) phi += kKappaD * mu_ * sl;
    }
    if (has_u_[is]) {
      const double su = wu_[i] - w[i];
      phi -= mu_ * std::log(su);
      if (!has_l_[is]) phi += kKappaD * mu_ * su;
    }
  }
  return phi;
}

Vec InteriorPoint::barrier_gradient() const {
  Vec g = Vec::Zero(N_);
  for (Index i = 0; i < n_; ++i) {
    if (!fixed_[static_cast<std::size_t>(i)]) g[i] = obj_scale_ * grad_[static_cast<std::size_t>(i)];
  }
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (has_l_[is]) {
      g[i] -= mu_ / (w_[i] - wl_[i]);
      if (!has_u_[is]) g[i] += kKappaD * mu_;
    }
    if (has_u_[is]) {
      g[i] += mu_ / (wu_[i] - w_[i]);
      if (!has_l_[is]) g[i] -= kKappaD * mu_;
    }
  }
  return g;
}

Vec InteriorPoint::jacobian_transpose_times(const Vec& y) const {
  Vec r = Vec::Zero(N_);
  for (std::size_t k = 0; k < jac_.size(); ++k) {
    const auto j = static_cast<std::size_t>(jac_.rows[k]);
    const Index col = jac_.cols[k];
    if (fixed_[static_cast<std::size_t>(col)]) continue;
    r[col] += row_scale_[j] * jvals_[k] * y[jac_.rows[k]];
  }
  for (Index k = 0; k < ns_; ++k) r[n_ + k] -= y[row_of_slack_[static_cast<std::size_t>(k)]];
  return r;
}

Vec InteriorPoint::dual_residual() const {
  Vec r = jacobian_transpose_times(y_) - zl_ + zu_;
  for (Index i = 0; i < n_; ++i) {
    if (fixed_[static_cast<std::size_t>(i)]) {
      r[i] = 0.0;
    } else {
      r[i] += obj_scale_ * grad_[static_cast<std::size_t>(i)];
    }
  }
  return r;
}

double InteriorPoint::complementarity(double mu) const {
  double worst = 0.0;
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (has_l_[is]) worst = std::max(worst, std::abs((w_[i] - wl_[i]) * zl_[i] - mu));
    if (has_u_[is]) worst = std::max(worst, std::abs((wu_[i] - w_[i]) * zu_[i] - mu));
  }
  return worst;
}

double InteriorPoint::dual_scale() const {
  const double denom = static_cast<double>(m_ + 2 * N_);
  if (denom == 0.0) return 1.0;
  const double avg = (y_.lpNorm<1>() + zl_.lpNorm<1>() + zu_.lpNorm<1>()) / denom;
  return std::max(kSMax, avg) / kSMax;
}

double InteriorPoint::compl_scale() const {
  const double denom = static_cast<double>(2 * N_);
  if (denom == 0.0) return 1.0;
  const double avg = (zl_.lpNorm<1>() + zu_.lpNorm<1>()) / denom;
  return std::max(kSMax, avg) / kSMax;
}

double InteriorPoint::scaled_error(double mu) const {
  return std::max({max_abs(dual_residual()) / dual_scale(), max_abs(cres_), complementarity(mu) / compl_scale()});
}

double InteriorPoint::unscaled_violation(std::span<const double> x, const std::vector<double>& craw) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < xl_.size(); ++i) {
    if (finite_bound(xl_[i])) worst = std::max(worst, xl_[i] - x[i]);
    if (finite_bound(xu_[i])) worst = std::max(worst, x[i] - xu_[i]);
  }
  for (std::size_t j = 0; j < cl_.size(); ++j) {
    if (finite_bound(cl_[j])) worst = std::max(worst, cl_[j] - craw[j]);
    if (finite_bound(cu_[j])) worst = std::max(worst, craw[j] - cu_[j]);
  }
  return worst;
}

void InteriorPoint::build_kkt_structure() {
  const Index K = N_ + m_;
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(static_cast<std::size_t>(K) + hess_.size() + jac_.size() + static_cast<std::size_t>(ns_));
  for (Index i = 0; i < K; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
  for (std::size_t k = 0; k < hess_.size(); ++k) {
    Index r = hess_.rows[k], c = hess_.cols[k];
    if (r < c) std::swap(r, c);
    if (fixed_[static_cast<std::size_t>(r)] || fixed_[static_cast<std::size_t>(c)]) continue;
    trip.emplace_back(static_cast<int>(r), static_cast<int>(c), 1.0);
  }
  for (std::size_t k = 0; k < jac_.size(); ++k) {
    if (fixed_[static_cast<std::size_t>(jac_.cols[k])]) continue;
    trip.emplace_back(static_cast<int>(N_ + jac_.rows[k]), jac_.cols[k], 1.0);
  }
  for (Index k = 0; k < ns_; ++k) {
    trip.emplace_back(static_cast<int>(N_ + row_of_slack_[static_cast<std::size_t>(k)]), static_cast<int>(n_ + k), 1.0);
  }
  kkt_.resize(K, K);
  kkt_.setFromTriplets(trip.begin(), trip.end());
  kkt_.makeCompressed();

  auto slot = [&](Index r, Index c) -> Index { return &kkt_.coeffRef(r, c) - kkt_.valuePtr(); };
  diag_slot_.resize(static_cast<std::size_t>(N_));
  for (Index i = 0; i < N_; ++i) diag_slot_[static_cast<std::size_t>(i)] = slot(i, i);
  cdiag_slot_.resize(static_cast<std::size_t>(m_));
  for (Index j = 0; j < m_; ++j) cdiag_slot_[static_cast<std::size_t>(j)] = slot(N_ + j, N_ + j);
  hess_slot_.assign(hess_.size(), -1);
  for (std::size_t k = 0; k < hess_.size(); ++k) {
    Index r = hess_.rows[k], c = hess_.cols[k];
    if (r < c) std::swap(r, c);
    if (fixed_[static_cast<std::size_t>(r)] || fixed_[static_cast<std::size_t>(c)]) continue;
    hess_slot_[k] = slot(r, c);
  }
  jac_slot_.assign(jac_.size(), -1);
  for (std::size_t k = 0; k < jac_.size(); ++k) {
    if (fixed_[static_cast<std::size_t>(jac_.cols[k])]) continue;
    jac_slot_[k] = slot(N_ + jac_.rows[k], jac_.cols[k]);
  }
  slack_slot_.resize(static_cast<std::size_t>(ns_));
  for (Index k = 0; k < ns_; ++k) {
    slack_slot_[static_cast<std::size_t>(k)] = slot(N_ + row_of_slack_[static_cast<std::size_t>(k)], n_ + k);
  }
  ldlt_.analyzePattern(kkt_);
}

void InteriorPoint::assemble(bool with_hessian, double delta_w, double delta_c, const Vec& sigma) {
  double* v = kkt_.valuePtr();
  std::fill(v, v + kkt_.nonZeros(), 0.0);
  for (Index i = 0; i < N_; ++i) {
    v[diag_slot_[static_cast<std::size_t>(i)]] = fixed_[static_cast<std::size_t>(i)] ? 1.0 : sigma[i] + delta_w;
  }
  if (with_hessian) {
    for (std::size_t k = 0; k < hess_.size(); ++k) {
      if (hess_slot_[k] >= 0) v[hess_slot_[k]] += hvals_[k];
    }
  }
  for (std::size_t k = 0; k < jac_.size(); ++k) {
    if (jac_slot_[k] >= 0) v[jac_slot_[k]] += row_scale_[static_cast<std::size_t>(jac_.rows[k])] * jvals_[k];
  }
  for (Index k = 0; k < ns_; ++k) v[slack_slot_[static_cast<std::size_t>(k)]] = -1.0;
  for (Index j = 0; j < m_; ++j) v[cdiag_slot_[static_cast<std::size_t>(j)]] = -delta_c;
}

// Factors the KKT matrix, adding delta_w I to the Hessian block until the
// inertia is (N, m, 0).
bool InteriorPoint::factorize_with_inertia(const Vec& sigma) {
  auto inertia_ok = [&]() {
    if (ldlt_.info() != Eigen::Success) return false;
    const Vec& d = ldlt_.vectorD();
    Index pos = 0, neg = 0;
    for (Index i = 0; i < d.size(); ++i) {
      if (d[i] > 0.0) {
        ++pos;
      } else if (d[i] < 0.0) {
        ++neg;
      } else {
        return false;
      }
    }
    return pos == N_ && neg == m_;
  };

  delta_c_ = kDeltaC;
  delta_w_ = 0.0;
  assemble(true, 0.0, delta_c_, sigma);
  ldlt_.factorize(kkt_);
  if (inertia_ok()) return true;

  double dw = delta_w_last_ == 0.0 ? kDeltaW0 : std::max(kDeltaWMin, kKappaWMinus * delta_w_last_);
  const bool first = delta_w_last_ == 0.0;
  for (;;) {
    assemble(true, dw, delta_c_, sigma);
    ldlt_.factorize(kkt_);
    if (inertia_ok()) {
      delta_w_ = dw;
      delta_w_last_ = dw;
      return true;
    }
    // A zero pivot hints at rank-deficient constraints; a larger delta_c helps.
    if (ldlt_.info() != Eigen::Success) delta_c_ = std::max(delta_c_, 1e-8 * std::pow(mu_, 0.25));
    dw *= first ? kKappaWPlusFirst : kKappaWPlus;
    if (dw > kDeltaWMax) return false;
  }
}

Vec InteriorPoint::solve_kkt(const Vec& rhs) {
  Vec sol = ldlt_.solve(rhs);
  if (!sol.allFinite()) return sol;
  const double rhs_norm = max_abs(rhs);
  auto residual = [&](const Vec& s) {
    Vec r = rhs - kkt_.selfadjointView<Eigen::Lower>() * s;
    r.tail(m_) -= delta_c_ * s.tail(m_);  // remove the regularization
    return r;
  };
  Vec r = residual(sol);
  double rnorm = max_abs(r);
  for (int it = 0; it < 10 && rnorm > 1e-12 * (1.0 + rhs_norm); ++it) {
    Vec cand = sol + ldlt_.solve(r);
    Vec rc = residual(cand);
    const double cnorm = max_abs(rc);
    if (!(cnorm < 0.9 * rnorm)) break;
    sol = std::move(cand);
    r = std::move(rc);
    rnorm = cnorm;
  }
  return sol;
}

void InteriorPoint::direction_from(const Vec& rhs, Vec& dw, Vec& dy) {
  Vec sol = solve_kkt(rhs);
  dw = sol.head(N_);
  dy = sol.tail(m_);
  for (Index i = 0; i < n_; ++i) {
    if (fixed_[static_cast<std::size_t>(i)]) dw[i] = 0.0;
  }
}

void InteriorPoint::bound_duals_step(const Vec& dw, Vec& dzl, Vec& dzu) const {
  dzl = Vec::Zero(N_);
  dzu = Vec::Zero(N_);
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (has_l_[is]) {
      const double sl = w_[i] - wl_[i];
      dzl[i] = (mu_ - zl_[i] * sl - zl_[i] * dw[i]) / sl;
    }
    if (has_u_[is]) {
      const double su = wu_[i] - w_[i];
      dzu[i] = (mu_ - zu_[i] * su + zu_[i] * dw[i]) / su;
    }
  }
}

double InteriorPoint::primal_step_limit(const Vec& dw, double tau) const {
  double alpha = 1.0;
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (has_l_[is] && dw[i] < 0.0) alpha = std::min(alpha, -tau * (w_[i] - wl_[i]) / dw[i]);
    if (has_u_[is] && dw[i] > 0.0) alpha = std::min(alpha, tau * (wu_[i] - w_[i]) / dw[i]);
  }
  return alpha;
}

double InteriorPoint::dual_step_limit(const Vec& dzl, const Vec& dzu, double tau) const {
  double alpha = 1.0;
  for (Index i = 0; i < N_; ++i) {
    if (dzl[i] < 0.0) alpha = std::min(alpha, -tau * zl_[i] / dzl[i]);
    if (dzu[i] < 0.0) alpha = std::min(alpha, -tau * zu_[i] / dzu[i]);
  }
  return alpha;
}

// y from  [I J^T; J 0] [d; y] = [-(grad f - zl + zu); 0]; discarded when large.
void InteriorPoint::initialize_multipliers_least_squares() {
  y_.setZero();
  if (m_ == 0) return;
  const Vec no_sigma = Vec::Zero(N_);  // delta_w = 1 supplies the identity block
  delta_c_ = 1e-8;
  assemble(false, 1.0, delta_c_, no_sigma);
  ldlt_.factorize(kkt_);
  if (ldlt_.info() != Eigen::Success) return;
  Vec rhs = Vec::Zero(N_ + m_);
  Vec g = Vec::Zero(N_);
  for (Index i = 0; i < n_; ++i) {
    if (!fixed_[static_cast<std::size_t>(i)]) g[i] = obj_scale_ * grad_[static_cast<std::size_t>(i)];
  }
  rhs.head(N_) = -(g - zl_ + zu_);
  Vec sol = solve_kkt(rhs);
  Vec y = sol.tail(m_);
  if (y.allFinite() && max_abs(y) <= 1e3) y_ = y;
}

void InteriorPoint::safeguard_bound_duals() {
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (has_l_[is]) {
      const double sl = w_[i] - wl_[i];
      zl_[i] = std::max(std::min(zl_[i], kKappaSigma * mu_ / sl), mu_ / (kKappaSigma * sl));
    }
    if (has_u_[is]) {
      const double su = wu_[i] - w_[i];
      zu_[i] = std::max(std::min(zu_[i], kKappaSigma * mu_ / su), mu_ / (kKappaSigma * su));
    }
  }
}

InteriorPoint::RestoreResult InteriorPoint::restore() {
  if (!opt_.allow_restoration || restorations_ >= kMaxRestorations) return RestoreResult::Failed;
  ++restorations_;
  std::vector<double> ref(head(w_, n_).begin(), head(w_, n_).end());
  RestorationProblem rp(prob_, row_scale_, ref, std::sqrt(mu_), mu_);
  SolverOptions inner = opt_;
  inner.allow_restoration = false;
  inner.mu_init = std::max(mu_, 1e-4);
  inner.bound_push = 1e-8;
  inner.max_gradient = 0.0;
  inner.log = nullptr;
  inner.constraint_tol = 1e-9;
  NlpSolution sol;
  try {
    sol = solve(rp, inner);
  } catch (const Error&) {
    return RestoreResult::Failed;
  }
  std::span<const double> x(sol.x.data(), static_cast<std::size_t>(n_));
  double violation = 0.0;
  for (Index j = 0; j < m_; ++j) {
    violation += sol.x[static_cast<std::size_t>(n_ + j)] + sol.x[static_cast<std::size_t>(n_ + m_ + j)];
  }
  if (sol.status == SolveStatus::Optimal && violation > 1e-6) return RestoreResult::Infeasible;
  if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::MaxIterations) return RestoreResult::Failed;
  reset_after_restoration(x);
  if (max_abs(cres_) > 1e-6) return sol.status == SolveStatus::Optimal ? RestoreResult::Infeasible : RestoreResult::Failed;
  return RestoreResult::Restored;
}

void InteriorPoint::reset_after_restoration(std::span<const double> x) {
  for (Index i = 0; i < n_; ++i) {
    if (!fixed_[static_cast<std::size_t>(i)]) w_[i] = x[static_cast<std::size_t>(i)];
  }
  std::vector<double> c(static_cast<std::size_t>(m_));
  prob_.constraints(head(w_, n_), c);
  for (Index k = 0; k < ns_; ++k) {
    const auto j = static_cast<std::size_t>(row_of_slack_[static_cast<std::size_t>(k)]);
    w_[n_ + k] = row_scale_[j] * c[j];
  }
  const double push = 1e-8;
  push_interior(w_, push);
  evaluate(w_, f_, cres_, craw_);
  evaluate_derivatives();
  for (Index i = 0; i < N_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    zl_[i] = has_l_[is] ? std::min(1.0, mu_ / (w_[i] - wl_[i])) : 0.0;
    zu_[i] = has_u_[is] ? std::min(1.0, mu_ / (wu_[i] - w_[i])) : 0.0;
  }
  initialize_multipliers_least_squares();
  delta_w_last_ = 0.0;
}

NlpSolution InteriorPoint::finish(SolveStatus status, int iterations) {
  NlpSolution out;
  out.status = status;
  out.iterations = iterations;
  out.restored = restorations_ > 0;
  out.x.assign(w_.data(), w_.data() + n_);
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] = std::clamp(out.x[i], xl_[i], xu_[i]);
  out.objective = prob_.objective(out.x);
  std::vector<double> c(static_cast<std::size_t>(m_));
  prob_.constraints(out.x, c);
  out.primal_infeasibility = unscaled_violation(out.x, c);
  out.dual_infeasibility = max_abs(dual_residual());
  out.complementarity = complementarity(0.0);

  out.y.resize(static_cast<std::size_t>(m_));
  for (Index j = 0; j < m_; ++j) {
    out.y[static_cast<std::size_t>(j)] = y_[j] * row_scale_[static_cast<std::size_t>(j)] / obj_scale_;
  }
  out.z_lower.assign(static_cast<std::size_t>(n_), 0.0);
  out.z_upper.assign(static_cast<std::size_t>(n_), 0.0);
  for (Index i = 0; i < n_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    out.z_lower[is] = zl_[i] / obj_scale_;
    out.z_upper[is] = zu_[i] / obj_scale_;
  }
  // Reduced costs of frozen variables.
  Vec jty = Vec::Zero(n_);
  for (std::size_t k = 0; k < jac_.size(); ++k) jty[jac_.cols[k]] += jvals_[k] * out.y[static_cast<std::size_t>(jac_.rows[k])];
  for (Index i = 0; i < n_; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (!fixed_[is]) continue;
    const double r = grad_[is] + jty[i];
    out.z_lower[is] = std::max(r, 0.0);
    out.z_upper[is] = std::max(-r, 0.0);
  }
  return out;
}

NlpSolution InteriorPoint::run(const WarmStart* start) {
  setup(start);

  const double theta_init = cres_.lpNorm<1>();
  const double theta_max = 1e4 * std::max(1.0, theta_init);
  const double theta_min = 1e-4 * std::max(1.0, theta_init);
  Filter filter;
  int acceptable_count = 0;
  int acceptable_seen = 0;
  double best_acceptable_error = kInf;
  std::optional<NlpSolution> best_acceptable;
  std::vector<double> recent_objectives;  // objective history once an acceptable point exists

  if (opt_.log) {
    *opt_.log << "iter    objective      inf_pr    inf_du  lg(mu)  lg(rg)  alpha_du  alpha_pr  ls\n";
  }

  double alpha_pr = 0.0, alpha_du = 0.0;
  int ls_trials = 0;
  for (int iter = 0;; ++iter) {
    // Convergence.
    const double dual_inf = max_abs(dual_residual());
    const double primal_inf = max_abs(cres_);
    const double e0 =
        std::max({dual_inf / dual_scale(), primal_inf, complementarity(0.0) / compl_scale()});
    const double violation = [&] {
      double worst = 0.0;
      for (std::size_t j = 0; j < cl_.size(); ++j) {
        if (finite_bound(cl_[j])) worst = std::max(worst, cl_[j] - craw_[j]);
        if (finite_bound(cu_[j])) worst = std::max(worst, craw_[j] - cu_[j]);
      }
      return worst;
    }();

    if (opt_.log) {
      char line[160];
      std::snprintf(line, sizeof line, "%4d  %14.7e  %8.2e  %8.2e  %6.2f  %6.2f  %8.2e  %8.2e  %2d\n", iter, f_,
                    primal_inf, dual_inf, std::log10(mu_), delta_w_ > 0 ? std::log10(delta_w_) : -99.0, alpha_du,
                    alpha_pr, ls_trials);
      *opt_.log << line;
    }

    if (e0 <= opt_.tol && violation <= opt_.constraint_tol) return finish(SolveStatus::Optimal, iter);
    if (e0 <= opt_.acceptable_tol && violation <= std::max(opt_.constraint_tol, 1e-6)) {
      if (++acceptable_count >= opt_.acceptable_iterations) {
        auto sol = finish(SolveStatus::Optimal, iter);
        sol.acceptable = true;
        return sol;
      }
      if (std::max(e0, violation) < best_acceptable_error) {
        best_acceptable_error = std::max(e0, violation);
        best_acceptable = finish(SolveStatus::Optimal, iter);
        best_acceptable->acceptable = true;
      }
      ++acceptable_seen;
    } else {
      acceptable_count = 0;
    }
    if (best_acceptable) recent_objectives.push_back(f_);
    const auto k = recent_objectives.size();
    const auto window = static_cast<std::size_t>(std::max(1, opt_.stall_iterations));
    const bool stalled = k > window && std::abs(recent_objectives[k - 1] - recent_objectives[k - 1 - window]) <=
                                           opt_.stall_tol * std::max(1.0, std::abs(f_));
    if (best_acceptable && (stalled || acceptable_seen >= opt_.acceptable_limit || iter >= opt_.max_iterations)) {
      best_acceptable->iterations = iter;
      return *best_acceptable;
    }
    if (iter >= opt_.max_iterations) return finish(SolveStatus::MaxIterations, iter);

    // Barrier update.
    while (scaled_error(mu_) <= kKappaEps * mu_ && mu_ > opt_.tol / 10.0) {
      mu_ = std::max(opt_.tol / 10.0, std::min(kKappaMu * mu_, std::pow(mu_, kThetaMu)));
      tau_ = std::max(kTauMin, 1.0 - mu_);
      filter.entries.clear();
    }

    // Newton direction.
    Vec ys = y_;
    for (Index j = 0; j < m_; ++j) ys[j] *= row_scale_[static_cast<std::size_t>(j)];
    prob_.hessian(head(w_, n_), obj_scale_, std::span<const double>(ys.data(), static_cast<std::size_t>(m_)), hvals_);
    for (double h : hvals_) {
      if (!std::isfinite(h)) return finish(SolveStatus::NumericalFailure, iter);
    }
    Vec sigma = Vec::Zero(N_);
    for (Index i = 0; i < N_; ++i) {
      const auto is = static_cast<std::size_t>(i);
      if (has_l_[is]) sigma[i] += zl_[i] / (w_[i] - wl_[i]);
      if (has_u_[is]) sigma[i] += zu_[i] / (wu_[i] - w_[i]);
    }
    if (!factorize_with_inertia(sigma)) return finish(SolveStatus::NumericalFailure, iter);

    const Vec gphi = barrier_gradient();
    Vec top = -(gphi + jacobian_transpose_times(y_));
    for (Index i = 0; i < n_; ++i) {
      if (fixed_[static_cast<std::size_t>(i)]) top[i] = 0.0;
    }
    Vec rhs(N_ + m_);
    rhs.head(N_) = top;
    rhs.tail(m_) = -cres_;
    Vec dw, dy;
    direction_from(rhs, dw, dy);
    if (!dw.allFinite() || !dy.allFinite()) return finish(SolveStatus::NumericalFailure, iter);

    // Line search.
    const double theta0 = cres_.lpNorm<1>();
    const double phi0 = barrier(w_, f_);
    const double dphi = gphi.dot(dw);
    const double alpha_max = primal_step_limit(dw, tau_);
    double alpha_min = kGammaTheta;
    if (dphi < 0.0) {
      alpha_min = std::min(kGammaTheta, -kGammaPhi * theta0 / dphi);
      if (theta0 <= theta_min) alpha_min = std::min(alpha_min, kDelta * std::pow(theta0, kSTheta) / std::pow(-dphi, kSPhi));
    }
    alpha_min *= kGammaAlpha;

    double tiny = 0.0;
    for (Index i = 0; i < N_; ++i) tiny = std::max(tiny, std::abs(dw[i]) / (1.0 + std::abs(w_[i])));
    const bool tiny_step = tiny < 10.0 * kEps;

    bool accepted = false;
    bool augment = false;
    double alpha = alpha_max;
    Vec acc_dw = dw, acc_dy = dy;
    double acc_alpha = alpha;
    Vec w_trial(N_);
    Vec c_trial(m_);
    std::vector<double> craw_trial(static_cast<std::size_t>(m_));
    double f_trial = 0.0;

    auto check = [&](double theta_t, double phi_t, double a, bool& aug) {
      if (!std::isfinite(phi_t) || theta_t > theta_max) return false;
      if (!filter.acceptable(theta_t, phi_t)) return false;
      const bool switching = dphi < 0.0 && a * std::pow(-dphi, kSPhi) > kDelta * std::pow(theta0, kSTheta);
      if (theta0 <= theta_min && switching) {
        aug = false;
        return phi_t <= phi0 + kEta * a * dphi;
      }
      aug = true;
      return theta_t <= (1.0 - kGammaTheta) * theta0 || phi_t <= phi0 - kGammaPhi * theta0;
    };

    ls_trials = 0;
    if (tiny_step) {
      w_trial = w_ + alpha_max * dw;
      if (evaluate(w_trial, f_trial, c_trial, craw_trial)) {
        accepted = true;
        acc_alpha = alpha_max;
      }
    }
    while (!accepted && alpha >= alpha_min) {
      w_trial = w_ + alpha * dw;
      if (evaluate(w_trial, f_trial, c_trial, craw_trial)) {
        const double theta_t = c_trial.lpNorm<1>();
        const double phi_t = barrier(w_trial, f_trial);
        if (check(theta_t, phi_t, alpha, augment)) {
          accepted = true;
          acc_alpha = alpha;
          break;
        }
        if (ls_trials == 0 && theta_t >= theta0 && m_ > 0) {
          // Second-order correction.
          Vec csoc = alpha * cres_ + c_trial;
          double theta_old = theta0;
          for (int p = 0; p < kMaxSoc; ++p) {
            Vec rs(N_ + m_);
            rs.head(N_) = top;
            rs.tail(m_) = -csoc;
            Vec dws, dys;
            direction_from(rs, dws, dys);
            if (!dws.allFinite()) break;
            const double a_soc = primal_step_limit(dws, tau_);
            Vec w_soc = w_ + a_soc * dws;
            double f_soc;
            Vec c_soc(m_);
            std::vector<double> craw_soc(static_cast<std::size_t>(m_));
            if (!evaluate(w_soc, f_soc, c_soc, craw_soc)) break;
            const double theta_s = c_soc.lpNorm<1>();
            const double phi_s = barrier(w_soc, f_soc);
            if (check(theta_s, phi_s, alpha, augment)) {
              accepted = true;
              acc_dw = dws;
              acc_dy = dys;
              acc_alpha = a_soc;
              w_trial = std::move(w_soc);
              c_trial = std::move(c_soc);
              craw_trial = std::move(craw_soc);
              f_trial = f_soc;
              break;
            }
            if (theta_s > kKappaSoc * theta_old) break;
            theta_old = theta_s;
            csoc = a_soc * csoc + c_soc;
          }
          if (accepted) break;
        }
      }
      alpha *= 0.5;
      ++ls_trials;
    }

    if (!accepted) {
      if (e0 <= opt_.acceptable_tol && violation <= std::max(opt_.constraint_tol, 1e-6)) {
        auto sol = finish(SolveStatus::Optimal, iter);
        sol.acceptable = true;
        return sol;
      }
      if (primal_inf <= opt_.tol) return finish(SolveStatus::NumericalFailure, iter);
      switch (restore()) {
        case RestoreResult::Restored:
          filter.entries.clear();
          alpha_pr = alpha_du = 0.0;
          continue;
        case RestoreResult::Infeasible:
          return finish(SolveStatus::Infeasible, iter);
        case RestoreResult::Failed:
          return finish(SolveStatus::NumericalFailure, iter);
      }
    }

    if (augment && !tiny_step) filter.add((1.0 - kGammaTheta) * theta0, phi0 - kGammaPhi * theta0);

    Vec dzl, dzu;
    bound_duals_step(acc_dw, dzl, dzu);
    const double a_z = dual_step_limit(dzl, dzu, tau_);
    w_ = w_trial;
    f_ = f_trial;
    cres_ = c_trial;
    craw_ = craw_trial;
    y_ += acc_alpha * acc_dy;
    zl_ += a_z * dzl;
    zu_ += a_z * dzu;
    safeguard_bound_duals();
    evaluate_derivatives();
    alpha_pr = acc_alpha;
    alpha_du = a_z;
    for (double g : grad_) {
      if (!std::isfinite(g)) return finish(SolveStatus::NumericalFailure, iter + 1);
    }
  }
}

}  // namespace

NlpSolution solve(const NlpProblem& problem, const SolverOptions& options, const WarmStart* start) {
  InteriorPoint ipm(problem, options);
  return ipm.run(start);
}

NlpSolution multistart_solve(const NlpProblem& problem, std::span<const std::vector<double>> starts,
                             const SolverOptions& options) {
  if (starts.empty()) return solve(problem, options);
  NlpSolution best;
  bool have_best = false;
  bool best_optimal = false;
  for (const auto& x0 : starts) {
    WarmStart ws{x0, {}, {}, {}};
    NlpSolution sol = solve(problem, options, &ws);
    const bool opt = sol.optimal();
    bool better = false;
    if (!have_best) {
      better = true;
    } else if (opt && !best_optimal) {
      better = true;
    } else if (opt && best_optimal) {
      better = sol.objective < best.objective;
    } else if (!opt && !best_optimal) {
      better = sol.primal_infeasibility < best.primal_infeasibility;
    }
    if (better) {
      best = std::move(sol);
      have_best = true;
      best_optimal = opt;
    }
  }
  return best;
}

DerivativeCheck check_derivatives(const NlpProblem& problem, std::span<const double> x,
                                  std::span<const double> multipliers, double objective_factor, double step) {
  const auto n = static_cast<std::size_t>(problem.num_variables());
  const auto m = static_cast<std::size_t>(problem.num_constraints());
  if (x.size() != n || multipliers.size() != m) {
    throw Error(ErrorKind::DimensionMismatch, "derivative check point has the wrong length");
  }
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  DerivativeCheck out;

  std::vector<double> g(n), xp(x.begin(), x.end()), xm(x.begin(), x.end());
  problem.gradient(x, g);
  const auto jp = problem.jacobian_pattern();
  std::vector<double> jv(jp.size());
  problem.jacobian(x, jv);
  std::vector<std::vector<std::pair<std::size_t, double>>> jcol(n);  // per column: (row, value)
  for (std::size_t k = 0; k < jp.size(); ++k) {
    jcol[static_cast<std::size_t>(jp.cols[k])].emplace_back(static_cast<std::size_t>(jp.rows[k]), jv[k]);
  }
  std::vector<double> cp(m), cm(m), dense(m);
  for (std::size_t i = 0; i < n; ++i) {
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    const double fd = (problem.objective(xp) - problem.objective(xm)) / (2.0 * step);
    out.gradient = std::max(out.gradient, rel(g[i], fd));
    problem.constraints(xp, cp);
    problem.constraints(xm, cm);
    std::fill(dense.begin(), dense.end(), 0.0);
    for (const auto& [r, v] : jcol[i]) dense[r] += v;
    for (std::size_t j = 0; j < m; ++j) out.jacobian = std::max(out.jacobian, rel(dense[j], (cp[j] - cm[j]) / (2.0 * step)));
    xp[i] = x[i];
    xm[i] = x[i];
  }

  // Hessian columns against differences of the Lagrangian gradient.
  const auto hp = problem.hessian_pattern();
  std::vector<double> hv(hp.size());
  problem.hessian(x, objective_factor, multipliers, hv);
  std::vector<std::vector<std::pair<std::size_t, double>>> hcol(n);
  for (std::size_t k = 0; k < hp.size(); ++k) {
    const auto r = static_cast<std::size_t>(hp.rows[k]);
    const auto c = static_cast<std::size_t>(hp.cols[k]);
    hcol[c].emplace_back(r, hv[k]);
    if (r != c) hcol[r].emplace_back(c, hv[k]);
  }
  auto lagrangian_gradient = [&](std::span<const double> at, std::vector<double>& out_g) {
    problem.gradient(at, out_g);
    for (auto& v : out_g) v *= objective_factor;
    std::vector<double> vals(jp.size());
    problem.jacobian(at, vals);
    for (std::size_t k = 0; k < jp.size(); ++k) {
      out_g[static_cast<std::size_t>(jp.cols[k])] += multipliers[static_cast<std::size_t>(jp.rows[k])] * vals[k];
    }
  };
  std::vector<double> gp(n), gm(n), col(n);
  for (std::size_t i = 0; i < n; ++i) {
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    lagrangian_gradient(xp, gp);
    lagrangian_gradient(xm, gm);
    std::fill(col.begin(), col.end(), 0.0);
    for (const auto& [r, v] : hcol[i]) col[r] += v;
    for (std::size_t r = 0; r < n; ++r) out.hessian = std::max(out.hessian, rel(col[r], (gp[r] - gm[r]) / (2.0 * step)));
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return out;
}

}  // namespace dopf::nlp
