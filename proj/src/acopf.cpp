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

#include "dopf/acopf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dopf/error.hpp"

namespace dopf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t at(int i) { return static_cast<std::size_t>(i); }

void check_crossing(double lo, double hi, bool tightened, const std::string& what) {
  if (lo > hi || (tightened && lo >= hi)) throw Error(ErrorKind::CrossedBounds, "tightened " + what + " bounds cross");
}

// Adds  p - flow(v_i, v_j, th_i, th_j) = 0  for one branch end.
void add_flow_definition(nlp::Model& m, int p_var, int q_var, const FlowCoefficients& fc, int vi, int vj, int ti,
                         int tj) {
  nlp::Expression p;
  p.add_linear(p_var, 1.0)
      .add_square(vi, -fc.g_self)
      .add_cos_product(vi, vj, ti, tj, -fc.g_mut)
      .add_sin_product(vi, vj, ti, tj, -fc.b_mut);
  m.add_constraint(std::move(p), 0.0, 0.0);
  nlp::Expression q;
  q.add_linear(q_var, 1.0)
      .add_square(vi, fc.b_self)
      .add_sin_product(vi, vj, ti, tj, -fc.g_mut)
      .add_cos_product(vi, vj, ti, tj, fc.b_mut);
  m.add_constraint(std::move(q), 0.0, 0.0);
}

void add_apparent_limit(nlp::Model& m, int p_var, int q_var, double smax) {
  nlp::Expression s;
  s.add_square(p_var, 1.0).add_square(q_var, 1.0);
  m.add_constraint(std::move(s), -nlp::kInfinity, smax * smax);
}

}  // namespace

TightenedBounds TightenedBounds::zero(const Network& net) {
  TightenedBounds t;
  t.v_lower.assign(net.bus_count(), 0.0);
  t.v_upper.assign(net.bus_count(), 0.0);
  t.q_lower.assign(net.bus_count(), 0.0);
  t.q_upper.assign(net.bus_count(), 0.0);
  t.s_upper.assign(net.branches.size(), 0.0);
  return t;
}

bool TightenedBounds::all_zero() const {
  auto zero = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }); };
  return zero(v_lower) && zero(v_upper) && zero(q_lower) && zero(q_upper) && zero(s_upper);
}

double TightenedBounds::distance(const TightenedBounds& o) const {
  double sum = 0.0;
  auto acc = [&](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "tightening vectors differ in size");
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  };
  acc(v_lower, o.v_lower);
  acc(v_upper, o.v_upper);
  acc(q_lower, o.q_lower);
  acc(q_upper, o.q_upper);
  acc(s_upper, o.s_upper);
  return std::sqrt(sum);
}

OperatingLimits OperatingLimits::from(const Network& net, const TightenedBounds* t) {
  OperatingLimits lim;
  const auto nb = net.bus_count();
  if (t != nullptr && (t->v_lower.size() != nb || t->v_upper.size() != nb || t->q_lower.size() != nb ||
                       t->q_upper.size() != nb || t->s_upper.size() != net.branches.size())) {
    throw Error(ErrorKind::DimensionMismatch, "tightening does not match the network");
  }
  lim.vmin.resize(nb);
  lim.vmax.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const double dl = t ? t->v_lower[i] : 0.0;
    const double du = t ? t->v_upper[i] : 0.0;
    if (dl < 0.0 || du < 0.0) throw Error(ErrorKind::InvalidArgument, "tightening must be nonnegative");
    lim.vmin[i] = net.buses[i].vmin + dl;
    lim.vmax[i] = net.buses[i].vmax - du;
    check_crossing(lim.vmin[i], lim.vmax[i], dl + du > 0.0, "voltage");
  }

  lim.qmin.resize(net.generators.size());
  lim.qmax.resize(net.generators.size());
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    lim.qmin[g] = net.generators[g].qmin;
    lim.qmax[g] = net.generators[g].qmax;
  }
  if (t != nullptr) {
    for (std::size_t i = 0; i < nb; ++i) {
      const double dl = t->q_lower[i];
      const double du = t->q_upper[i];
      if (dl < 0.0 || du < 0.0) throw Error(ErrorKind::InvalidArgument, "tightening must be nonnegative");
      if (dl == 0.0 && du == 0.0) continue;
      const auto& gens = net.generators_at_bus[i];
      if (gens.empty()) throw Error(ErrorKind::InvalidArgument, "reactive tightening at a bus without generators");
      const double lo = net.bus_qmin(static_cast<int>(i)) + dl;
      const double hi = net.bus_qmax(static_cast<int>(i)) - du;
      check_crossing(lo, hi, true, "reactive");
      const double range = net.bus_qmax(static_cast<int>(i)) - net.bus_qmin(static_cast<int>(i));
      for (int g : gens) {
        const auto& gen = net.generators[at(g)];
        const double share = range > 0.0 ? (gen.qmax - gen.qmin) / range : 1.0 / static_cast<double>(gens.size());
        lim.qmin[at(g)] = gen.qmin + dl * share;
        lim.qmax[at(g)] = gen.qmax - du * share;
      }
    }
  }

  lim.smax.resize(net.branches.size());
  for (std::size_t l = 0; l < net.branches.size(); ++l) {
    const auto& rate = net.branches[l].rate;
    const double d = t ? t->s_upper[l] : 0.0;
    if (d < 0.0) throw Error(ErrorKind::InvalidArgument, "tightening must be nonnegative");
    if (!rate) {
      if (d > 0.0) throw Error(ErrorKind::InvalidArgument, "flow tightening on a branch without a limit");
      continue;
    }
    lim.smax[l] = *rate - d;
    check_crossing(0.0, *lim.smax[l], d > 0.0, "flow");
  }
  return lim;
}

GridVariables GridVariables::empty(const Network& net) {
  GridVariables v;
  v.v.assign(net.bus_count(), -1);
  v.theta.assign(net.bus_count(), -1);
  v.pg.assign(net.generators.size(), -1);
  v.qg.assign(net.generators.size(), -1);
  v.p_from.assign(net.branches.size(), -1);
  v.q_from.assign(net.branches.size(), -1);
  v.p_to.assign(net.branches.size(), -1);
  v.q_to.assign(net.branches.size(), -1);
  return v;
}

void add_bus(nlp::Model& m, GridVariables& vars, int bus, double vmin, double vmax) {
  vars.v[at(bus)] = m.add_variable(vmin, vmax, std::clamp(1.0, vmin, vmax));
  vars.theta[at(bus)] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, 0.0);
}

void add_generator(nlp::Model& m, GridVariables& vars, const Network& net, int gen, double qmin, double qmax) {
  const auto& g = net.generators[at(gen)];
  vars.pg[at(gen)] = m.add_variable(g.pmin, g.pmax, 0.5 * (g.pmin + g.pmax));
  vars.qg[at(gen)] = m.add_variable(qmin, qmax, 0.5 * (qmin + qmax));
}

void add_branch(nlp::Model& m, GridVariables& vars, const Network& net, int l, std::optional<double> smax) {
  const auto& br = net.branches[at(l)];
  const int vf = vars.v[at(br.from)], vt = vars.v[at(br.to)];
  const int tf = vars.theta[at(br.from)], tt = vars.theta[at(br.to)];
  if (vf < 0 || vt < 0) throw Error(ErrorKind::InvalidArgument, "branch end bus is not modelled");
  const auto start_v = m.start();
  const double v1 = start_v[at(vf)], v2 = start_v[at(vt)];
  const double dth = start_v[at(tf)] - start_v[at(tt)];
  vars.p_from[at(l)] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, br.from_end.p(v1, v2, dth));
  vars.q_from[at(l)] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, br.from_end.q(v1, v2, dth));
  vars.p_to[at(l)] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, br.to_end.p(v2, v1, -dth));
  vars.q_to[at(l)] = m.add_variable(-nlp::kInfinity, nlp::kInfinity, br.to_end.q(v2, v1, -dth));
  add_flow_definition(m, vars.p_from[at(l)], vars.q_from[at(l)], br.from_end, vf, vt, tf, tt);
  add_flow_definition(m, vars.p_to[at(l)], vars.q_to[at(l)], br.to_end, vt, vf, tt, tf);
  if (smax) {
    add_apparent_limit(m, vars.p_from[at(l)], vars.q_from[at(l)], *smax);
    add_apparent_limit(m, vars.p_to[at(l)], vars.q_to[at(l)], *smax);
  }
}

void add_balance(nlp::Model& m, const GridVariables& vars, const Network& net, int bus, std::span<const int> p_inj,
                 std::span<const int> q_inj, const BusDemand& demand) {
  const auto& b = net.buses[at(bus)];
  nlp::Expression p, q;
  for (int k : p_inj) p.add_linear(k, 1.0);
  for (int k : q_inj) q.add_linear(k, 1.0);
  for (int l : net.branches_from[at(bus)]) {
    if (vars.p_from[at(l)] >= 0) {
      p.add_linear(vars.p_from[at(l)], -1.0);
      q.add_linear(vars.q_from[at(l)], -1.0);
    }
  }
  for (int l : net.branches_to[at(bus)]) {
    if (vars.p_to[at(l)] >= 0) {
      p.add_linear(vars.p_to[at(l)], -1.0);
      q.add_linear(vars.q_to[at(l)], -1.0);
    }
  }
  const int v = vars.v[at(bus)];
  if (b.gs != 0.0) p.add_square(v, -b.gs);
  if (b.bs != 0.0) q.add_square(v, b.bs);
  if (demand.factor >= 0) {
    if (demand.pd != 0.0) p.add_linear(demand.factor, -demand.pd);
    if (demand.qd != 0.0) q.add_linear(demand.factor, -demand.qd);
    m.add_constraint(std::move(p), 0.0, 0.0);
    m.add_constraint(std::move(q), 0.0, 0.0);
  } else {
    m.add_constraint(std::move(p), demand.pd, demand.pd);
    m.add_constraint(std::move(q), demand.qd, demand.qd);
  }
}

std::vector<int> active_injections(const GridVariables& vars, const Network& net, int bus) {
  std::vector<int> out;
  for (int g : net.generators_at_bus[at(bus)]) {
    if (vars.pg[at(g)] >= 0) out.push_back(vars.pg[at(g)]);
  }
  return out;
}

std::vector<int> reactive_injections(const GridVariables& vars, const Network& net, int bus) {
  std::vector<int> out;
  for (int g : net.generators_at_bus[at(bus)]) {
    if (vars.qg[at(g)] >= 0) out.push_back(vars.qg[at(g)]);
  }
  return out;
}

void add_generation_cost(nlp::Expression& objective, const GridVariables& vars, const Network& net,
                         std::span<const int> gens) {
  for (int g : gens) {
    const auto& gen = net.generators[at(g)];
    const int p = vars.pg[at(g)];
    if (gen.c2 != 0.0) objective.add_square(p, gen.c2);
    if (gen.c1 != 0.0) objective.add_linear(p, gen.c1);
    objective.add_constant(gen.c0);
  }
}

GridState read_state(const GridVariables& vars, std::span<const double> x) {
  auto pick = [&](const std::vector<int>& idx) {
    std::vector<double> out(idx.size(), kNaN);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) out[i] = x[at(idx[i])];
    }
    return out;
  };
  GridState s;
  s.v = pick(vars.v);
  s.theta = pick(vars.theta);
  s.pg = pick(vars.pg);
  s.qg = pick(vars.qg);
  s.p_from = pick(vars.p_from);
  s.q_from = pick(vars.q_from);
  s.p_to = pick(vars.p_to);
  s.q_to = pick(vars.q_to);
  return s;
}

OpfModel build_opf(std::shared_ptr<const Network> net, const TightenedBounds* tightening, const LoadAssignment* loads) {
  if (!net) throw Error(ErrorKind::InvalidArgument, "null network");
  const Network& n = *net;
  if (loads != nullptr && (loads->pd.size() != n.bus_count() || loads->qd.size() != n.bus_count())) {
    throw Error(ErrorKind::DimensionMismatch, "load assignment does not match the network");
  }
  OpfModel out;
  out.net_ = net;
  out.limits_ = OperatingLimits::from(n, tightening);
  out.vars_ = GridVariables::empty(n);
  auto& m = out.model_;
  auto& vars = out.vars_;

  std::vector<int> all_gens;
  for (std::size_t g = 0; g < n.generators.size(); ++g) {
    add_generator(m, vars, n, static_cast<int>(g), out.limits_.qmin[g], out.limits_.qmax[g]);
    all_gens.push_back(static_cast<int>(g));
  }
  for (std::size_t i = 0; i < n.bus_count(); ++i) {
    add_bus(m, vars, static_cast<int>(i), out.limits_.vmin[i], out.limits_.vmax[i]);
  }
  m.set_variable_bounds(vars.theta[at(n.reference)], 0.0, 0.0);
  for (std::size_t l = 0; l < n.branches.size(); ++l) {
    add_branch(m, vars, n, static_cast<int>(l), out.limits_.smax[l]);
  }
  out.balance_row_.resize(n.bus_count());
  for (std::size_t i = 0; i < n.bus_count(); ++i) {
    const int bus = static_cast<int>(i);
    BusDemand d{loads ? loads->pd[i] : n.buses[i].pd, loads ? loads->qd[i] : n.buses[i].qd, -1};
    out.balance_row_[i] = m.num_constraints();
    add_balance(m, vars, n, bus, active_injections(vars, n, bus), reactive_injections(vars, n, bus), d);
  }
  nlp::Expression cost;
  add_generation_cost(cost, vars, n, all_gens);
  m.set_objective(std::move(cost));
  return out;
}

OpfResult solve_opf(const OpfModel& model, const nlp::SolverOptions& options) {
  OpfResult r;
  r.solution = nlp::solve(model.model(), options);
  r.state = read_state(model.variables(), r.solution.x);
  const Network& n = model.network();
  r.dispatch.pg = r.state.pg;
  r.dispatch.voltage_setpoint.assign(n.bus_count(), kNaN);
  for (int b : n.generator_buses) r.dispatch.voltage_setpoint[at(b)] = r.state.v[at(b)];
  r.dispatch.voltage_setpoint[at(n.reference)] = r.state.v[at(n.reference)];
  r.dispatch.slack_angle = r.state.theta[at(n.reference)];
  r.dispatch.objective = r.solution.objective;
  return r;
}

double balance_residual(const Network& net, const GridState& s, const LoadAssignment& loads) {
  std::vector<double> p(net.bus_count(), 0.0), q(net.bus_count(), 0.0);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    p[at(net.generators[g].bus)] += s.pg[g];
    q[at(net.generators[g].bus)] += s.qg[g];
  }
  for (const auto& br : net.branches) {
    const auto f = at(br.from), t = at(br.to);
    const double d = s.theta[f] - s.theta[t];
    p[f] -= br.from_end.p(s.v[f], s.v[t], d);
    q[f] -= br.from_end.q(s.v[f], s.v[t], d);
    p[t] -= br.to_end.p(s.v[t], s.v[f], -d);
    q[t] -= br.to_end.q(s.v[t], s.v[f], -d);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    const auto& b = net.buses[i];
    const double v2 = s.v[i] * s.v[i];
    worst = std::max(worst, std::abs(p[i] - b.gs * v2 - loads.pd[i]));
    worst = std::max(worst, std::abs(q[i] + b.bs * v2 - loads.qd[i]));
  }
  return worst;
}

double cost_gap(double tight, double base) {
  if (!(base > 0.0)) throw Error(ErrorKind::NonpositiveBase, "cost gap needs a positive base objective");
  return (tight - base) / base;
}

}  // namespace dopf
