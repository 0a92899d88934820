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

#include "dopf/admm.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "dopf/error.hpp"

namespace dopf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t at(int i) { return static_cast<std::size_t>(i); }

}  // namespace

void add_region(nlp::Model& m, GridVariables& vars, const Decomposition& dec, int region,
                const OperatingLimits& limits, const std::function<BusDemand(int bus)>& demand) {
  const Network& net = *dec.network;
  const Region& reg = dec.regions.at(at(region));
  for (int g : reg.generators) add_generator(m, vars, net, g, limits.qmin[at(g)], limits.qmax[at(g)]);
  for (int b : reg.buses) add_bus(m, vars, b, limits.vmin[at(b)], limits.vmax[at(b)]);
  for (int b : reg.fictitious_buses) add_bus(m, vars, b, limits.vmin[at(b)], limits.vmax[at(b)]);
  if (reg.has_reference) m.set_variable_bounds(vars.theta[at(net.reference)], 0.0, 0.0);
  for (int l : reg.branches) add_branch(m, vars, net, l, limits.smax[at(l)]);
  for (int b : reg.buses) {
    add_balance(m, vars, net, b, active_injections(vars, net, b), reactive_injections(vars, net, b), demand(b));
  }
}

int shared_index(const GridVariables& vars, const SharedVariable& s) {
  const auto e = at(s.element);
  switch (s.quantity) {
    case SharedQuantity::VoltageMagnitude:
      return vars.v[e];
    case SharedQuantity::VoltageAngle:
      return vars.theta[e];
    case SharedQuantity::ActiveFrom:
      return vars.p_from[e];
    case SharedQuantity::ReactiveFrom:
      return vars.q_from[e];
    case SharedQuantity::ActiveTo:
      return vars.p_to[e];
    case SharedQuantity::ReactiveTo:
      return vars.q_to[e];
  }
  return -1;
}

double shared_value(const GridState& s, const SharedVariable& v) {
  const auto e = at(v.element);
  switch (v.quantity) {
    case SharedQuantity::VoltageMagnitude:
      return s.v[e];
    case SharedQuantity::VoltageAngle:
      return s.theta[e];
    case SharedQuantity::ActiveFrom:
      return s.p_from[e];
    case SharedQuantity::ReactiveFrom:
      return s.q_from[e];
    case SharedQuantity::ActiveTo:
      return s.p_to[e];
    case SharedQuantity::ReactiveTo:
      return s.q_to[e];
  }
  return kNaN;
}

double flat_value(const Network& net, const SharedVariable& s) {
  switch (s.quantity) {
    case SharedQuantity::VoltageMagnitude:
      return 1.0;
    case SharedQuantity::VoltageAngle:
      return 0.0;
    case SharedQuantity::ActiveFrom:
      return net.branches[at(s.element)].from_end.p(1.0, 1.0, 0.0);
    case SharedQuantity::ReactiveFrom:
      return net.branches[at(s.element)].from_end.q(1.0, 1.0, 0.0);
    case SharedQuantity::ActiveTo:
      return net.branches[at(s.element)].to_end.p(1.0, 1.0, 0.0);
    case SharedQuantity::ReactiveTo:
      return net.branches[at(s.element)].to_end.q(1.0, 1.0, 0.0);
  }
  return kNaN;
}

// ---------------------------------------------------------------------------

ConsensusState ConsensusState::flat(const Decomposition& dec) {
  ConsensusState s;
  for (const auto& b : dec.boundaries) {
    PairState p;
    for (const auto& v : b.variables) p.z_bar.push_back(flat_value(*dec.network, v));
    p.z_first = p.z_bar;
    p.z_second = p.z_bar;
    p.y_first.assign(p.z_bar.size(), 0.0);
    p.y_second.assign(p.z_bar.size(), 0.0);
    s.z_bar_previous.push_back(p.z_bar);
    s.pairs.push_back(std::move(p));
  }
  return s;
}

void average_and_update(ConsensusState& state, double alpha) {
  state.z_bar_previous.resize(state.pairs.size());
  for (std::size_t k = 0; k < state.pairs.size(); ++k) {
    auto& p = state.pairs[k];
    state.z_bar_previous[k] = p.z_bar;
    for (std::size_t i = 0; i < p.z_bar.size(); ++i) {
      p.z_bar[i] = 0.5 * (p.z_first[i] + p.z_second[i]);
      p.y_first[i] += alpha * (p.z_first[i] - p.z_bar[i]);
      p.y_second[i] += alpha * (p.z_second[i] - p.z_bar[i]);
    }
  }
  ++state.iteration;
}

Residuals residuals(const ConsensusState& state, double alpha) {
  Residuals r;
  double r2 = 0.0, s2 = 0.0, z2 = 0.0, zb2 = 0.0, y2 = 0.0;
  for (std::size_t k = 0; k < state.pairs.size(); ++k) {
    const auto& p = state.pairs[k];
    const auto& prev = state.z_bar_previous[k];
    for (std::size_t i = 0; i < p.z_bar.size(); ++i) {
      for (double z : {p.z_first[i], p.z_second[i]}) {
        const double d = z - p.z_bar[i];
        r.primal_inf = std::max(r.primal_inf, std::abs(d));
        r2 += d * d;
        z2 += z * z;
      }
      const double s = alpha * (p.z_bar[i] - prev[i]);
      r.dual_inf = std::max(r.dual_inf, std::abs(s));
      s2 += 2.0 * s * s;
      zb2 += 2.0 * p.z_bar[i] * p.z_bar[i];
      y2 += p.y_first[i] * p.y_first[i] + p.y_second[i] * p.y_second[i];
    }
  }
  r.primal_two = std::sqrt(r2);
  r.dual_two = std::sqrt(s2);
  r.z_two = std::sqrt(z2);
  r.z_bar_two = std::sqrt(zb2);
  r.y_two = std::sqrt(y2);
  return r;
}

std::vector<double> peer_mismatches(const ConsensusState& state) {
  std::vector<double> out;
  for (const auto& p : state.pairs) {
    for (std::size_t i = 0; i < p.z_bar.size(); ++i) out.push_back(std::abs(p.z_first[i] - p.z_second[i]));
  }
  return out;
}

Tolerances scaled_tolerances(const AdmmConfig& cfg, const Residuals& res, int boundary_variables) {
  if (!cfg.eps_abs) return {cfg.eps_pri, cfg.eps_dual.value_or(std::numeric_limits<double>::infinity())};
  const double p = 2.0 * boundary_variables;
  const double n = boundary_variables;
  Tolerances t;
  t.primal = std::sqrt(p) * *cfg.eps_abs + cfg.eps_rel * std::max(res.z_two, res.z_bar_two);
  t.dual = std::sqrt(n) * *cfg.eps_abs + cfg.eps_rel * res.y_two;
  return t;
}

// ---------------------------------------------------------------------------

RegionSubproblem::RegionSubproblem(const Decomposition& dec, int region, const OperatingLimits& limits,
                                   const LoadAssignment& loads)
    : dec_(&dec), region_(region) {
  const Network& net = *dec.network;
  if (loads.pd.size() != net.bus_count() || loads.qd.size() != net.bus_count()) {
    throw Error(ErrorKind::DimensionMismatch, "load assignment does not match the network");
  }
  vars_ = GridVariables::empty(net);
  add_region(model_, vars_, dec, region, limits,
             [&](int bus) { return BusDemand{loads.pd[at(bus)], loads.qd[at(bus)], -1}; });
  add_generation_cost(cost_, vars_, net, dec.regions[at(region)].generators);
  for (std::size_t k = 0; k < dec.boundaries.size(); ++k) {
    const auto& b = dec.boundaries[k];
    if (b.first != region && b.second != region) continue;
    Link link{static_cast<int>(k), b.first == region, {}};
    for (const auto& v : b.variables) link.index.push_back(shared_index(vars_, v));
    links_.push_back(std::move(link));
  }
}

const nlp::NlpSolution& RegionSubproblem::solve(const ConsensusState& state, double alpha,
                                                const nlp::SolverOptions& options) {
  nlp::Expression objective = cost_;
  for (const auto& link : links_) {
    const auto& p = state.pairs[at(link.boundary)];
    const auto& y = link.first ? p.y_first : p.y_second;
    for (std::size_t i = 0; i < link.index.size(); ++i) {
      const int j = link.index[i];
      objective.add_square(j, 0.5 * alpha);
      objective.add_linear(j, y[i] - alpha * p.z_bar[i]);
      objective.add_constant(0.5 * alpha * p.z_bar[i] * p.z_bar[i]);
    }
  }
  model_.set_objective(std::move(objective));
  if (solved_) {
    const auto warm = solution_.warm_start();
    auto next = nlp::solve(model_, options, &warm);
    if (!next.optimal()) {
      // Retry from the previous primal point alone.
      nlp::WarmStart primal{solution_.x, {}, {}, {}};
      next = nlp::solve(model_, options, &primal);
    }
    solution_ = std::move(next);
  } else {
    solution_ = nlp::solve(model_, options);
  }
  solved_ = solution_.optimal();
  return solution_;
}

void RegionSubproblem::write_shared(ConsensusState& state) const {
  for (const auto& link : links_) {
    auto& p = state.pairs[at(link.boundary)];
    auto& z = link.first ? p.z_first : p.z_second;
    for (std::size_t i = 0; i < link.index.size(); ++i) z[i] = solution_.x[at(link.index[i])];
  }
}

double RegionSubproblem::generation_cost() const { return cost_.evaluate(solution_.x); }

// ---------------------------------------------------------------------------

std::string_view to_string(AdmmStatus s) {
  switch (s) {
    case AdmmStatus::Converged:
      return "converged";
    case AdmmStatus::MaxIterations:
      return "max_iterations";
    case AdmmStatus::SubproblemFailure:
      return "subproblem_failure";
  }
  return "unknown";
}

namespace {

// System state assembled from the regions: each bus and generator from its
// owner, each branch from the region owning its from-bus.
GridState assemble_state(const Decomposition& dec, const std::vector<RegionSubproblem>& regions) {
  const Network& net = *dec.network;
  GridState s;
  s.v.assign(net.bus_count(), kNaN);
  s.theta.assign(net.bus_count(), kNaN);
  s.pg.assign(net.generators.size(), kNaN);
  s.qg.assign(net.generators.size(), kNaN);
  s.p_from.assign(net.branches.size(), kNaN);
  s.q_from = s.p_from;
  s.p_to = s.p_from;
  s.q_to = s.p_from;
  for (const auto& sub : regions) {
    const auto& x = sub.solution().x;
    const auto& vars = sub.variables();
    const Region& reg = dec.regions[at(sub.region())];
    for (int b : reg.buses) {
      s.v[at(b)] = x[at(vars.v[at(b)])];
      s.theta[at(b)] = x[at(vars.theta[at(b)])];
    }
    for (int g : reg.generators) {
      s.pg[at(g)] = x[at(vars.pg[at(g)])];
      s.qg[at(g)] = x[at(vars.qg[at(g)])];
    }
    for (int l : reg.branches) {
      if (dec.region_of_bus[at(net.branches[at(l)].from)] != sub.region()) continue;
      s.p_from[at(l)] = x[at(vars.p_from[at(l)])];
      s.q_from[at(l)] = x[at(vars.q_from[at(l)])];
      s.p_to[at(l)] = x[at(vars.p_to[at(l)])];
      s.q_to[at(l)] = x[at(vars.q_to[at(l)])];
    }
  }
  return s;
}

Dispatch make_dispatch(const Network& net, const GridState& s) {
  Dispatch d;
  d.pg = s.pg;
  d.voltage_setpoint.assign(net.bus_count(), kNaN);
  for (int b : net.generator_buses) d.voltage_setpoint[at(b)] = s.v[at(b)];
  d.voltage_setpoint[at(net.reference)] = s.v[at(net.reference)];
  d.slack_angle = s.theta[at(net.reference)];
  for (std::size_t g = 0; g < net.generators.size(); ++g) d.objective += net.generators[g].cost(s.pg[g]);
  return d;
}

}  // namespace

AdmmResult run_admm(const Decomposition& dec, const AdmmConfig& cfg, const LoadAssignment* loads,
                    const TightenedBounds* tightening, const std::vector<double>& checkpoints) {
  if (!dec.network) throw Error(ErrorKind::InvalidArgument, "decomposition without a network");
  if (!(cfg.alpha > 0.0) || !(cfg.eps_pri > 0.0) || (cfg.eps_dual && !(*cfg.eps_dual > 0.0))) {
    throw Error(ErrorKind::InvalidArgument, "penalty and tolerances must be positive");
  }
  const Network& net = *dec.network;
  const LoadAssignment nominal = LoadAssignment::nominal(net);
  const LoadAssignment& demand = loads ? *loads : nominal;
  const OperatingLimits limits = OperatingLimits::from(net, tightening);

  std::vector<RegionSubproblem> regions;
  regions.reserve(dec.regions.size());
  for (std::size_t r = 0; r < dec.regions.size(); ++r) regions.emplace_back(dec, static_cast<int>(r), limits, demand);

  AdmmResult out;
  for (double c : checkpoints) {
    Checkpoint cp;
    cp.eps_pri = c;
    out.checkpoints.push_back(std::move(cp));
  }
  const double peer_factor = cfg.strict_peer ? 0.5 : 1.0;
  const int nb = dec.boundary_variable_count();
  ConsensusState state = ConsensusState::flat(dec);

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    if (cfg.parallel && regions.size() > 1) {
      std::vector<std::future<void>> jobs;
      for (auto& sub : regions) {
        jobs.push_back(std::async(std::launch::async, [&] { sub.solve(state, cfg.alpha, cfg.solver); }));
      }
      for (auto& j : jobs) j.get();
    } else {
      for (auto& sub : regions) sub.solve(state, cfg.alpha, cfg.solver);
    }
    out.iterations = k;
    for (const auto& sub : regions) {
      if (!sub.solution().optimal()) {
        out.status = AdmmStatus::SubproblemFailure;
        out.failed_region = sub.region();
        return out;
      }
    }
    for (const auto& sub : regions) sub.write_shared(state);
    average_and_update(state, cfg.alpha);
    const Residuals res = residuals(state, cfg.alpha);
    const Tolerances tol = scaled_tolerances(cfg, res, nb);

    TraceRow row{k, res.primal_inf, res.primal_two, res.dual_two, 0.0};
    for (const auto& sub : regions) row.objective += sub.generation_cost();
    out.trace.push_back(row);

    const bool two = cfg.eps_abs.has_value() || cfg.norm == ResidualNorm::Two;
    const double primal = two ? res.primal_two : res.primal_inf;
    const double dual = two ? res.dual_two : res.dual_inf;
    for (auto& cp : out.checkpoints) {
      if (cp.reached || primal > cp.eps_pri * peer_factor) continue;
      cp.reached = true;
      cp.iterations = k;
      cp.dispatch = make_dispatch(net, assemble_state(dec, regions));
      cp.mismatches = peer_mismatches(state);
    }
    const bool dual_ok = !(cfg.eps_dual || cfg.eps_abs) || dual <= tol.dual;
    if (primal <= tol.primal * peer_factor && dual_ok) {
      out.status = AdmmStatus::Converged;
      break;
    }
  }
  out.state = assemble_state(dec, regions);
  out.dispatch = make_dispatch(net, out.state);
  out.mismatches = peer_mismatches(state);
  return out;
}

}  // namespace dopf
