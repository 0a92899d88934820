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

#include "dopf/acpf.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>

#include "dopf/error.hpp"

namespace dopf {

std::string_view to_string(PfStatus s) {
  switch (s) {
    case PfStatus::Converged:
      return "converged";
    case PfStatus::NotConverged:
      return "not_converged";
    case PfStatus::LowVoltage:
      return "low_voltage";
  }
  return "unknown";
}

std::string_view to_string(LimitFamily f) {
  switch (f) {
    case LimitFamily::VoltageUpper:
      return "v_upper";
    case LimitFamily::VoltageLower:
      return "v_lower";
    case LimitFamily::ReactiveUpper:
      return "q_upper";
    case LimitFamily::ReactiveLower:
      return "q_lower";
    case LimitFamily::Flow:
      return "s_upper";
  }
  return "unknown";
}

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

struct YEntry {
  int col;
  double g;
  double b;
};

// Bus admittance matrix as adjacency rows.
std::vector<std::vector<YEntry>> admittance_rows(const Network& net) {
  std::vector<std::map<int, std::pair<double, double>>> acc(net.bus_count());
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    auto& d = acc[i][static_cast<int>(i)];
    d.first += net.buses[i].gs;
    d.second += net.buses[i].bs;
  }
  for (const auto& br : net.branches) {
    auto add = [&](int r, int c, double g, double b) {
      auto& e = acc[at(r)][c];
      e.first += g;
      e.second += b;
    };
    add(br.from, br.from, br.from_end.g_self, br.from_end.b_self);
    add(br.from, br.to, br.from_end.g_mut, br.from_end.b_mut);
    add(br.to, br.to, br.to_end.g_self, br.to_end.b_self);
    add(br.to, br.from, br.to_end.g_mut, br.to_end.b_mut);
  }
  std::vector<std::vector<YEntry>> rows(net.bus_count());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (const auto& [c, gb] : acc[i]) rows[i].push_back({c, gb.first, gb.second});
  }
  return rows;
}

void split_by_range(const Network& net, const std::vector<int>& gens, double total, bool reactive,
                    std::vector<double>& out) {
  double range = 0.0;
  for (int g : gens) {
    const auto& gen = net.generators[at(g)];
    range += reactive ? gen.qmax - gen.qmin : gen.pmax - gen.pmin;
  }
  for (int g : gens) {
    const auto& gen = net.generators[at(g)];
    const double r = reactive ? gen.qmax - gen.qmin : gen.pmax - gen.pmin;
    const double share = range > 0.0 ? r / range : 1.0 / static_cast<double>(gens.size());
    out[at(g)] = total * share;
  }
}

}  // namespace

PfSolution run_pf(const Network& net, const Dispatch& d, const LoadAssignment& loads, const PfOptions& opt) {
  const auto nb = net.bus_count();
  if (d.pg.size() != net.generators.size() || d.voltage_setpoint.size() != nb || loads.pd.size() != nb ||
      loads.qd.size() != nb) {
    throw Error(ErrorKind::DimensionMismatch, "dispatch or loads do not match the network");
  }
  const int ref = net.reference;
  // 0 = PQ, 1 = PV, 2 = slack
  std::vector<int> kind(nb, 0);
  for (int b : net.generator_buses) kind[at(b)] = 1;
  kind[at(ref)] = 2;

  PfSolution out;
  out.v.assign(nb, 1.0);
  out.theta.assign(nb, d.slack_angle);
  std::vector<double> p_spec(nb), q_spec(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    p_spec[i] = -loads.pd[i];
    q_spec[i] = -loads.qd[i];
    if (kind[i] != 0) {
      const double vs = d.voltage_setpoint[i];
      if (!std::isfinite(vs)) throw Error(ErrorKind::InvalidArgument, "missing voltage setpoint at a generator bus");
      out.v[i] = vs;
    }
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) p_spec[at(net.generators[g].bus)] += d.pg[g];

  // Unknown ordering: angles of non-slack buses, then magnitudes of PQ buses.
  std::vector<int> ang_idx(nb, -1), mag_idx(nb, -1);
  int nu = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    if (kind[i] != 2) ang_idx[i] = nu++;
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (kind[i] == 0) mag_idx[i] = nu++;
  }

  const auto Y = admittance_rows(net);
  std::vector<double> P(nb), Q(nb);
  auto injections = [&]() {
    for (std::size_t i = 0; i < nb; ++i) {
      double p = 0.0, q = 0.0;
      for (const auto& e : Y[i]) {
        const double a = out.theta[i] - out.theta[at(e.col)];
        const double vv = out.v[i] * out.v[at(e.col)];
        p += vv * (e.g * std::cos(a) + e.b * std::sin(a));
        q += vv * (e.g * std::sin(a) - e.b * std::cos(a));
      }
      P[i] = p;
      Q[i] = q;
    }
  };

  Eigen::VectorXd f(nu);
  auto mismatch = [&]() {
    injections();
    double worst = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      if (ang_idx[i] >= 0) {
        f[ang_idx[i]] = P[i] - p_spec[i];
        worst = std::max(worst, std::abs(f[ang_idx[i]]));
      }
      if (mag_idx[i] >= 0) {
        f[mag_idx[i]] = Q[i] - q_spec[i];
        worst = std::max(worst, std::abs(f[mag_idx[i]]));
      }
    }
    return worst;
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool pattern_ready = false;
  double worst = mismatch();
  int it = 0;
  while (worst > opt.tol && it < opt.max_iterations && std::isfinite(worst)) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < nb; ++i) {
      const int rp = ang_idx[i];  // active row
      const int rq = mag_idx[i];  // reactive row
      if (rp < 0 && rq < 0) continue;
      const double vi = out.v[i];
      for (const auto& e : Y[i]) {
        const auto k = at(e.col);
        const int ca = ang_idx[k];
        const int cm = mag_idx[k];
        if (k == i) {
          if (rp >= 0 && ca >= 0) trip.emplace_back(rp, ca, -Q[i] - e.b * vi * vi);
          if (rp >= 0 && cm >= 0) trip.emplace_back(rp, cm, P[i] / vi + e.g * vi);
          if (rq >= 0 && ca >= 0) trip.emplace_back(rq, ca, P[i] - e.g * vi * vi);
          if (rq >= 0 && cm >= 0) trip.emplace_back(rq, cm, Q[i] / vi - e.b * vi);
        } else {
          const double a = out.theta[i] - out.theta[k];
          const double vk = out.v[k];
          const double gc_bs = e.g * std::cos(a) + e.b * std::sin(a);
          const double gs_bc = e.g * std::sin(a) - e.b * std::cos(a);
          if (rp >= 0 && ca >= 0) trip.emplace_back(rp, ca, vi * vk * gs_bc);
          if (rp >= 0 && cm >= 0) trip.emplace_back(rp, cm, vi * gc_bs);
          if (rq >= 0 && ca >= 0) trip.emplace_back(rq, ca, -vi * vk * gc_bs);
          if (rq >= 0 && cm >= 0) trip.emplace_back(rq, cm, vi * gs_bc);
        }
      }
    }
    Eigen::SparseMatrix<double> J(nu, nu);
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
    if (!pattern_ready) {
      lu.analyzePattern(J);
      pattern_ready = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) break;
    Eigen::VectorXd dx = lu.solve(-f);
    if (!dx.allFinite()) break;
    for (std::size_t i = 0; i < nb; ++i) {
      if (ang_idx[i] >= 0) out.theta[i] += dx[ang_idx[i]];
      if (mag_idx[i] >= 0) out.v[i] += dx[mag_idx[i]];
    }
    ++it;
    worst = mismatch();
  }
  out.iterations = it;
  out.max_mismatch = worst;
  if (!(worst <= opt.tol)) {
    out.status = PfStatus::NotConverged;
  } else if (*std::min_element(out.v.begin(), out.v.end()) < opt.low_voltage) {
    out.status = PfStatus::LowVoltage;
  } else {
    out.status = PfStatus::Converged;
  }

  // Generator outputs implied by the bus balances.
  out.pg = d.pg;
  out.qg.assign(net.generators.size(), 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& gens = net.generators_at_bus[i];
    if (gens.empty()) continue;
    split_by_range(net, gens, Q[i] + loads.qd[i], true, out.qg);
    if (static_cast<int>(i) == ref) split_by_range(net, gens, P[i] + loads.pd[i], false, out.pg);
  }

  const auto nl = net.branches.size();
  out.p_from.resize(nl);
  out.q_from.resize(nl);
  out.p_to.resize(nl);
  out.q_to.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& br = net.branches[l];
    const auto fb = at(br.from), tb = at(br.to);
    const double a = out.theta[fb] - out.theta[tb];
    out.p_from[l] = br.from_end.p(out.v[fb], out.v[tb], a);
    out.q_from[l] = br.from_end.q(out.v[fb], out.v[tb], a);
    out.p_to[l] = br.to_end.p(out.v[tb], out.v[fb], -a);
    out.q_to[l] = br.to_end.q(out.v[tb], out.v[fb], -a);
  }
  return out;
}

ViolationMetrics measure_violations(const Network& net, const PfSolution& pf, double tolerance) {
  ViolationMetrics m;
  auto record = [&](LimitFamily fam, int element, double excess, double range) {
    if (!(excess > tolerance)) return;
    const double denom = range > 0.0 ? range : 1.0;
    m.violations.push_back({fam, element, excess, 100.0 * excess / denom});
  };
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    const auto& b = net.buses[i];
    const double range = b.vmax - b.vmin;
    record(LimitFamily::VoltageUpper, static_cast<int>(i), pf.v[i] - b.vmax, range);
    record(LimitFamily::VoltageLower, static_cast<int>(i), b.vmin - pf.v[i], range);
  }
  for (int bus : net.generator_buses) {
    double q = 0.0;
    for (int g : net.generators_at_bus[at(bus)]) q += pf.qg[at(g)];
    const double lo = net.bus_qmin(bus), hi = net.bus_qmax(bus);
    record(LimitFamily::ReactiveUpper, bus, q - hi, hi - lo);
    record(LimitFamily::ReactiveLower, bus, lo - q, hi - lo);
  }
  for (std::size_t l = 0; l < net.branches.size(); ++l) {
    const auto& rate = net.branches[l].rate;
    if (!rate) continue;
    const double s = std::max(std::hypot(pf.p_from[l], pf.q_from[l]), std::hypot(pf.p_to[l], pf.q_to[l]));
    record(LimitFamily::Flow, static_cast<int>(l), s - *rate, *rate);
  }
  m.count = static_cast<int>(m.violations.size());
  if (m.count > 0) {
    double sum = 0.0;
    for (const auto& v : m.violations) sum += v.percent;
    m.average_percent = sum / m.count;
  }
  return m;
}

}  // namespace dopf
