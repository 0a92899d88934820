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

#include "dopf/wcv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dopf/admm.hpp"
#include "dopf/error.hpp"

namespace dopf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxEnumeratedMismatches = 16;

std::size_t at(int i) { return static_cast<std::size_t>(i); }

}  // namespace

std::string bound_name(const Network& net, const BoundId& b) {
  std::string name(to_string(b.family));
  if (b.family == LimitFamily::Flow) {
    const auto& br = net.branches.at(at(b.element));
    return name + ":" + std::to_string(net.buses[at(br.from)].id) + "-" + std::to_string(net.buses[at(br.to)].id) +
           "#" + std::to_string(b.element + 1);
  }
  return name + ":" + std::to_string(net.buses.at(at(b.element)).id);
}

std::string_view to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::Solved:
      return "solved";
    case BoundStatus::Unknown:
      return "unknown";
    case BoundStatus::EmptySet:
      return "empty_set";
  }
  return "unknown";
}

const WorstCase* ViolationReport::find(const BoundId& b) const {
  for (const auto& e : entries) {
    if (e.bound == b) return &e;
  }
  return nullptr;
}

double ViolationReport::max_w() const {
  double w = kNegInf;
  for (const auto& e : entries) {
    if (e.status == BoundStatus::Solved) w = std::max(w, e.w);
  }
  return w;
}

WcvProblem::WcvProblem(const Decomposition& dec, const WcvConfig& cfg, const TightenedBounds* tightening)
    : dec_(&dec), cfg_(cfg) {
  if (!dec.network) throw Error(ErrorKind::InvalidArgument, "decomposition without a network");
  if (!(cfg.eps_pri >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be nonnegative");
  if (!(cfg.load_factor >= 0.0 && cfg.load_factor < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "load variation factor must lie in [0, 1)");
  }
  if (cfg.budget && !(*cfg.budget > 0.0 && *cfg.budget <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "budget must lie in (0, 1]");
  }
  if (cfg.starts < 1) throw Error(ErrorKind::InvalidArgument, "at least one start is needed");
  const Network& net = *dec.network;
  const OperatingLimits limits = OperatingLimits::from(net, tightening);
  auto& m = model_;

  load_factor_.assign(net.bus_count(), -1);
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    if (net.buses[i].pd != 0.0 || net.buses[i].qd != 0.0) {
      load_factor_[i] = m.add_variable(1.0 - cfg.load_factor, 1.0 + cfg.load_factor, 1.0);
    }
  }
  auto demand = [&](int bus) {
    const auto& b = net.buses[at(bus)];
    if (load_factor_[at(bus)] < 0) return BusDemand{0.0, 0.0, -1};
    return BusDemand{b.pd, b.qd, load_factor_[at(bus)]};
  };

  // Region copies, feasible for the tightened limits.
  for (std::size_t r = 0; r < dec.regions.size(); ++r) {
    GridVariables vars = GridVariables::empty(net);
    add_region(m, vars, dec, static_cast<int>(r), limits, demand);
    for (int v : vars.v) {
      if (v >= 0) voltage_vars_.push_back(v);
    }
    region_vars_.push_back(std::move(vars));
  }
  counts_.region_rows = m.num_constraints();

  // Peer mismatches.
  int row = m.num_constraints();
  std::vector<nlp::Expression> differences;
  for (const auto& b : dec.boundaries) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& v : b.variables) {
      const int a = shared_index(region_vars_[at(b.first)], v);
      const int c = shared_index(region_vars_[at(b.second)], v);
      pairs.emplace_back(a, c);
      nlp::Expression d;
      d.add_linear(a, 1.0).add_linear(c, -1.0);
      differences.push_back(d);
      m.add_constraint(std::move(d), -cfg.eps_pri, cfg.eps_pri);
    }
    copies_.push_back(std::move(pairs));
  }
  counts_.mismatch_rows = m.num_constraints() - row;

  // Cumulative mismatch budget.
  row = m.num_constraints();
  if (cfg.budget && *cfg.budget < 1.0 && !differences.empty()) {
    const double total = *cfg.budget * static_cast<double>(differences.size()) * cfg.eps_pri;
    if (cfg.encoding == BudgetEncoding::Auxiliary) {
      nlp::Expression sum;
      for (const auto& d : differences) {
        const int t = m.add_variable(0.0, nlp::kInfinity, 0.0);
        nlp::Expression above = d, below = d;
        above.add_linear(t, -1.0);  // d - t <= 0
        below.add_linear(t, 1.0);   // d + t >= 0
        m.add_constraint(std::move(above), -nlp::kInfinity, 0.0);
        m.add_constraint(std::move(below), 0.0, nlp::kInfinity);
        sum.add_linear(t, 1.0);
      }
      m.add_constraint(std::move(sum), -nlp::kInfinity, total);
    } else {
      const auto n = differences.size();
      if (n > kMaxEnumeratedMismatches) {
        throw Error(ErrorKind::InvalidArgument, "sign enumeration is limited to 16 shared variables");
      }
      for (std::uint32_t signs = 0; signs < (1u << n); ++signs) {
        nlp::Expression e;
        for (std::size_t k = 0; k < n; ++k) {
          const double s = (signs >> k) & 1u ? -1.0 : 1.0;
          for (const auto& t : differences[k].terms) e.add_linear(t.a, s * t.coef);
        }
        m.add_constraint(std::move(e), -nlp::kInfinity, total);
      }
    }
  }
  counts_.budget_rows = m.num_constraints() - row;

  // Physical system driven by the regional setpoints.
  row = m.num_constraints();
  system_ = GridVariables::empty(net);
  system_q_.assign(net.bus_count(), -1);
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    const int bus = static_cast<int>(i);
    const auto& owner = region_vars_[at(dec.region_of_bus[i])];
    if (net.has_generator(bus)) {
      system_.v[i] = owner.v[i];
      system_q_[i] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, 0.0);
    } else {
      system_.v[i] = m.add_variable(cfg.low_voltage, nlp::kInfinity, 1.0);
      voltage_vars_.push_back(system_.v[i]);
    }
    system_.theta[i] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, 0.0);
  }
  m.set_variable_bounds(system_.theta[at(net.reference)], 0.0, 0.0);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const int bus = net.generators[g].bus;
    if (bus != net.reference) system_.pg[g] = region_vars_[at(dec.region_of_bus[at(bus)])].pg[g];
  }
  slack_p_ = m.add_variable(-nlp::kInfinity, nlp::kInfinity, 0.0);
  for (std::size_t l = 0; l < net.branches.size(); ++l) add_branch(m, system_, net, static_cast<int>(l), std::nullopt);
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    const int bus = static_cast<int>(i);
    std::vector<int> p_inj = bus == net.reference ? std::vector<int>{slack_p_} : active_injections(system_, net, bus);
    std::vector<int> q_inj;
    if (system_q_[i] >= 0) q_inj.push_back(system_q_[i]);
    add_balance(m, system_, net, bus, p_inj, q_inj, demand(bus));
  }
  counts_.system_rows = m.num_constraints() - row;
  counts_.variables = m.num_variables();
}

std::vector<BoundId> WcvProblem::bounds() const {
  const Network& net = *dec_->network;
  std::vector<BoundId> out;
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    out.push_back({LimitFamily::VoltageUpper, static_cast<int>(i)});
    out.push_back({LimitFamily::VoltageLower, static_cast<int>(i)});
  }
  for (int b : net.generator_buses) {
    out.push_back({LimitFamily::ReactiveUpper, b});
    out.push_back({LimitFamily::ReactiveLower, b});
  }
  for (std::size_t l = 0; l < net.branches.size(); ++l) {
    if (net.branches[l].rate) out.push_back({LimitFamily::Flow, static_cast<int>(l)});
  }
  return out;
}

std::vector<WcvProblem::Objective> WcvProblem::objectives(const BoundId& b) const {
  const Network& net = *dec_->network;
  const auto e = at(b.element);
  std::vector<Objective> out;
  nlp::Expression f;
  switch (b.family) {
    case LimitFamily::VoltageUpper:
      f.add_linear(system_.v[e], -1.0);
      out.push_back({f, -1.0, net.buses[e].vmax, false});
      break;
    case LimitFamily::VoltageLower:
      f.add_linear(system_.v[e], 1.0);
      out.push_back({f, -1.0, -net.buses[e].vmin, false});
      break;
    case LimitFamily::ReactiveUpper:
      f.add_linear(system_q_[e], -1.0);
      out.push_back({f, -1.0, net.bus_qmax(b.element), false});
      break;
    case LimitFamily::ReactiveLower:
      f.add_linear(system_q_[e], 1.0);
      out.push_back({f, -1.0, -net.bus_qmin(b.element), false});
      break;
    case LimitFamily::Flow: {
      const double rate = net.branches[e].rate.value();
      nlp::Expression from, to;
      from.add_square(system_.p_from[e], -1.0).add_square(system_.q_from[e], -1.0);
      to.add_square(system_.p_to[e], -1.0).add_square(system_.q_to[e], -1.0);
      out.push_back({from, -1.0, rate, true});
      out.push_back({to, -1.0, rate, true});
      break;
    }
  }
  return out;
}

double WcvProblem::physical_value(const BoundId& b, std::span<const double> x) const {
  const auto e = at(b.element);
  switch (b.family) {
    case LimitFamily::VoltageUpper:
    case LimitFamily::VoltageLower:
      return x[at(system_.v[e])];
    case LimitFamily::ReactiveUpper:
    case LimitFamily::ReactiveLower:
      return x[at(system_q_[e])];
    case LimitFamily::Flow:
      return std::max(std::hypot(x[at(system_.p_from[e])], x[at(system_.q_from[e])]),
                      std::hypot(x[at(system_.p_to[e])], x[at(system_.q_to[e])]));
  }
  return 0.0;
}

namespace {

double violation_of(const Network& net, const BoundId& b, double value) {
  const auto e = at(b.element);
  switch (b.family) {
    case LimitFamily::VoltageUpper:
      return value - net.buses[e].vmax;
    case LimitFamily::VoltageLower:
      return net.buses[e].vmin - value;
    case LimitFamily::ReactiveUpper:
      return value - net.bus_qmax(b.element);
    case LimitFamily::ReactiveLower:
      return net.bus_qmin(b.element) - value;
    case LimitFamily::Flow:
      return value - net.branches[e].rate.value();
  }
  return 0.0;
}

}  // namespace

std::vector<std::vector<double>> WcvProblem::start_points() const {
  std::vector<std::vector<double>> out;
  const auto base = model_.start();
  out.emplace_back(base.begin(), base.end());
  for (int s = 1; s < cfg_.starts; ++s) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> dist(-cfg_.perturbation, cfg_.perturbation);
    std::vector<double> x(base.begin(), base.end());
    for (int v : voltage_vars_) x[at(v)] *= 1.0 + dist(rng);
    out.push_back(std::move(x));
  }
  return out;
}

Witness WcvProblem::witness(std::span<const double> x) const {
  const Network& net = *dec_->network;
  Witness w;
  w.loads.factor.assign(net.bus_count(), 1.0);
  w.loads.pd.resize(net.bus_count());
  w.loads.qd.resize(net.bus_count());
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    if (load_factor_[i] >= 0) w.loads.factor[i] = x[at(load_factor_[i])];
    w.loads.pd[i] = w.loads.factor[i] * net.buses[i].pd;
    w.loads.qd[i] = w.loads.factor[i] * net.buses[i].qd;
  }
  w.dispatch.pg.resize(net.generators.size());
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& owner = region_vars_[at(dec_->region_of_bus[at(net.generators[g].bus)])];
    w.dispatch.pg[g] = x[at(owner.pg[g])];
    w.dispatch.objective += net.generators[g].cost(w.dispatch.pg[g]);
  }
  w.dispatch.voltage_setpoint.assign(net.bus_count(), std::numeric_limits<double>::quiet_NaN());
  for (int b : net.generator_buses) w.dispatch.voltage_setpoint[at(b)] = x[at(system_.v[at(b)])];
  w.dispatch.voltage_setpoint[at(net.reference)] = x[at(system_.v[at(net.reference)])];
  w.dispatch.slack_angle = 0.0;
  for (const auto& pairs : copies_) {
    for (const auto& [a, c] : pairs) w.mismatches.push_back(x[at(a)] - x[at(c)]);
  }
  return w;
}

WorstCase WcvProblem::worst_case(const BoundId& bound, std::span<const std::vector<double>> extra_starts) const {
  const Network& net = *dec_->network;
  if (bound.family == LimitFamily::Flow && !net.branches.at(at(bound.element)).rate) {
    throw Error(ErrorKind::InvalidArgument, "branch has no flow limit");
  }
  if ((bound.family == LimitFamily::ReactiveUpper || bound.family == LimitFamily::ReactiveLower) &&
      !net.has_generator(bound.element)) {
    throw Error(ErrorKind::InvalidArgument, "reactive bound at a bus without generators");
  }
  auto starts = start_points();
  for (const auto& s : extra_starts) {
    if (s.size() == at(model_.num_variables())) starts.push_back(s);
  }
  WorstCase best;
  best.bound = bound;
  best.w = kNegInf;
  bool any_optimal = false;
  for (auto& obj : objectives(bound)) {
    nlp::Model m = model_;
    m.set_objective(std::move(obj.expr));
    auto sol = nlp::multistart_solve(m, starts, cfg_.solver);
    if (!sol.optimal()) {
      if (!any_optimal) best.solver_status = sol.status;
      continue;
    }
    const double value = physical_value(bound, sol.x);
    const double w = violation_of(net, bound, value);
    if (!any_optimal || w > best.w) {
      best.w = w;
      best.status = BoundStatus::Solved;
      best.solver_status = sol.status;
      best.witness = witness(sol.x);
      best.witness.value = value;
      best.x = std::move(sol.x);
    }
    any_optimal = true;
  }
  if (!any_optimal) best.status = BoundStatus::Unknown;
  return best;
}

bool WcvProblem::feasible() const {
  nlp::Model m = model_;
  m.set_objective(nlp::Expression{});
  bool declared_infeasible = false;
  for (const auto& s : start_points()) {
    nlp::WarmStart ws{s, {}, {}, {}};
    const auto sol = nlp::solve(m, cfg_.solver, &ws);
    if (sol.optimal()) return true;
    if (sol.status == nlp::SolveStatus::Infeasible) declared_infeasible = true;
  }
  return !declared_infeasible;
}

ViolationReport WcvProblem::solve(std::span<const BoundId> subset, const ViolationReport* previous) const {
  std::vector<BoundId> targets(subset.begin(), subset.end());
  if (targets.empty()) targets = bounds();
  ViolationReport report;
  if (!feasible()) {
    report.empty_set = true;
    for (const auto& b : targets) {
      WorstCase wc;
      wc.bound = b;
      wc.w = kNegInf;
      wc.status = BoundStatus::EmptySet;
      wc.solver_status = nlp::SolveStatus::Infeasible;
      report.entries.push_back(std::move(wc));
    }
    return report;
  }
  for (const auto& b : targets) {
    std::vector<std::vector<double>> extra;
    if (previous) {
      if (const auto* p = previous->find(b); p && !p->x.empty()) extra.push_back(p->x);
    }
    report.entries.push_back(worst_case(b, extra));
  }
  return report;
}

double WcvProblem::reevaluate(const BoundId& b, const Witness& w) const {
  const Network& net = *dec_->network;
  const PfSolution pf = run_pf(net, w.dispatch, w.loads);
  if (pf.status == PfStatus::NotConverged) return std::numeric_limits<double>::quiet_NaN();
  const auto e = at(b.element);
  double value = 0.0;
  switch (b.family) {
    case LimitFamily::VoltageUpper:
    case LimitFamily::VoltageLower:
      value = pf.v[e];
      break;
    case LimitFamily::ReactiveUpper:
    case LimitFamily::ReactiveLower:
      for (int g : net.generators_at_bus[e]) value += pf.qg[at(g)];
      break;
    case LimitFamily::Flow:
      value = std::max(std::hypot(pf.p_from[e], pf.q_from[e]), std::hypot(pf.p_to[e], pf.q_to[e]));
      break;
  }
  return violation_of(net, b, value);
}

std::vector<BoundId> screen_bounds(const ViolationReport& report, double margin) {
  std::vector<BoundId> out;
  for (const auto& e : report.entries) {
    if (e.status == BoundStatus::Unknown || (e.status == BoundStatus::Solved && e.w > -margin)) {
      out.push_back(e.bound);
    }
  }
  return out;
}

}  // namespace dopf
