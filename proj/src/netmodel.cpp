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

#include "dopf/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "dopf/error.hpp"

namespace dopf {

double FlowCoefficients::p(double vi, double vj, double angle_ij) const {
  return g_self * vi * vi + vi * vj * (g_mut * std::cos(angle_ij) + b_mut * std::sin(angle_ij));
}

double FlowCoefficients::q(double vi, double vj, double angle_ij) const {
  return -b_self * vi * vi + vi * vj * (g_mut * std::sin(angle_ij) - b_mut * std::cos(angle_ij));
}

int Network::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<int>(i);
  }
  throw Error(ErrorKind::UnknownBusId, "bus " + std::to_string(id));
}

double Network::bus_qmin(int i) const {
  double q = 0.0;
  for (int g : generators_at_bus[static_cast<std::size_t>(i)]) q += generators[static_cast<std::size_t>(g)].qmin;
  return q;
}

double Network::bus_qmax(int i) const {
  double q = 0.0;
  for (int g : generators_at_bus[static_cast<std::size_t>(i)]) q += generators[static_cast<std::size_t>(g)].qmax;
  return q;
}

Network to_per_unit(const RawCase& c) {
  validate_case(c);
  if (c.base_mva <= 0.0) throw Error(ErrorKind::InvalidCase, "baseMVA must be positive");
  const double base = c.base_mva;

  Network net;
  net.name = c.name;
  net.base_mva = base;
  std::map<int, int> index;
  for (const auto& row : c.buses) {
    Bus b;
    b.id = row.id;
    b.is_reference = row.type == kBusRef;
    b.gs = row.gs / base;
    b.bs = row.bs / base;
    b.vmin = row.vmin;
    b.vmax = row.vmax;
    b.pd = row.pd / base;
    b.qd = row.qd / base;
    if (b.is_reference) net.reference = static_cast<int>(net.buses.size());
    index[b.id] = static_cast<int>(net.buses.size());
    net.buses.push_back(b);
  }

  for (std::size_t k = 0; k < c.generators.size(); ++k) {
    const auto& row = c.generators[k];
    Generator g;
    g.bus = index.at(row.bus);
    g.pmin = row.pmin / base;
    g.pmax = row.pmax / base;
    g.qmin = row.qmin / base;
    g.qmax = row.qmax / base;
    g.vg = row.vg;
    if (k < c.costs.size()) {
      const auto& coef = c.costs[k].coefficients;
      const std::size_t n = coef.size();
      const double c2 = n >= 3 ? coef[n - 3] : 0.0;
      const double c1 = n >= 2 ? coef[n - 2] : 0.0;
      const double c0 = n >= 1 ? coef[n - 1] : 0.0;
      g.c2 = c2 * base * base;
      g.c1 = c1 * base;
      g.c0 = c0;
    }
    net.generators.push_back(g);
  }

  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& row = c.branches[k];
    if (row.r == 0.0 && row.x == 0.0) {
      throw Error(ErrorKind::ZeroImpedanceBranch, "branch " + std::to_string(k + 1) + " (" +
                                                      std::to_string(row.from) + "-" +
                                                      std::to_string(row.to) + ")");
    }
    Branch br;
    br.from = index.at(row.from);
    br.to = index.at(row.to);
    const std::complex<double> y = 1.0 / std::complex<double>(row.r, row.x);
    br.g = y.real();
    br.b = y.imag();
    br.b_charge = row.b / 2.0;
    br.tap = row.tap == 0.0 ? 1.0 : row.tap;
    br.shift = row.shift * std::numbers::pi / 180.0;
    const std::complex<double> ratio = std::polar(br.tap, br.shift);
    const std::complex<double> charge(0.0, br.b_charge);
    const std::complex<double> y_ff = (y + charge) / (br.tap * br.tap);
    const std::complex<double> y_ft = -y / std::conj(ratio);
    const std::complex<double> y_tf = -y / ratio;
    const std::complex<double> y_tt = y + charge;
    br.from_end = {y_ff.real(), y_ff.imag(), y_ft.real(), y_ft.imag()};
    br.to_end = {y_tt.real(), y_tt.imag(), y_tf.real(), y_tf.imag()};
    if (row.rate_a > 0.0) br.rate = row.rate_a / base;
    net.branches.push_back(br);
  }

  net.generators_at_bus.assign(net.buses.size(), {});
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    net.generators_at_bus[static_cast<std::size_t>(net.generators[g].bus)].push_back(static_cast<int>(g));
  }
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (!net.generators_at_bus[i].empty()) net.generator_buses.push_back(static_cast<int>(i));
  }
  net.branches_from.assign(net.buses.size(), {});
  net.branches_to.assign(net.buses.size(), {});
  for (std::size_t e = 0; e < net.branches.size(); ++e) {
    net.branches_from[static_cast<std::size_t>(net.branches[e].from)].push_back(static_cast<int>(e));
    net.branches_to[static_cast<std::size_t>(net.branches[e].to)].push_back(static_cast<int>(e));
  }
  for (const auto& b : net.buses) {
    if (b.vmin >= b.vmax) {
      throw Error(ErrorKind::InvalidCase, "bus " + std::to_string(b.id) + " has Vmin >= Vmax");
    }
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    if (gen.pmin > gen.pmax || gen.qmin > gen.qmax) {
      throw Error(ErrorKind::InvalidCase, "generator " + std::to_string(g + 1) + " has crossed limits");
    }
  }
  return net;
}

// ---------------------------------------------------------------------------

int Decomposition::boundary_variable_count() const {
  int n = 0;
  for (const auto& b : boundaries) n += static_cast<int>(b.variables.size());
  return n;
}

Decomposition decompose(std::shared_ptr<const Network> net, const PartitionSpec& spec) {
  if (!net) throw Error(ErrorKind::InvalidArgument, "null network");
  const auto& n = *net;
  Decomposition dec;
  dec.network = net;
  dec.region_of_bus.assign(n.buses.size(), -1);
  for (std::size_t i = 0; i < n.buses.size(); ++i) {
    const auto it = spec.region_of_bus.find(n.buses[i].id);
    if (it == spec.region_of_bus.end()) {
      throw Error(ErrorKind::UnassignedBus, "bus " + std::to_string(n.buses[i].id) + " has no region");
    }
    dec.region_of_bus[i] = it->second - 1;
  }
  const int regions = spec.region_count;
  dec.regions.resize(static_cast<std::size_t>(regions));
  for (int r = 0; r < regions; ++r) dec.regions[static_cast<std::size_t>(r)].id = r + 1;

  for (std::size_t i = 0; i < n.buses.size(); ++i) {
    auto& region = dec.regions[static_cast<std::size_t>(dec.region_of_bus[i])];
    region.buses.push_back(static_cast<int>(i));
    if (static_cast<int>(i) == n.reference) region.has_reference = true;
  }
  for (std::size_t g = 0; g < n.generators.size(); ++g) {
    const int r = dec.region_of_bus[static_cast<std::size_t>(n.generators[g].bus)];
    dec.regions[static_cast<std::size_t>(r)].generators.push_back(static_cast<int>(g));
  }

  std::map<std::pair<int, int>, std::size_t> pair_index;
  std::vector<std::set<int>> fictitious(static_cast<std::size_t>(regions));
  std::vector<std::set<int>> neighbors(static_cast<std::size_t>(regions));
  for (std::size_t e = 0; e < n.branches.size(); ++e) {
    const auto& br = n.branches[e];
    const int rf = dec.region_of_bus[static_cast<std::size_t>(br.from)];
    const int rt = dec.region_of_bus[static_cast<std::size_t>(br.to)];
    dec.regions[static_cast<std::size_t>(rf)].branches.push_back(static_cast<int>(e));
    if (rf == rt) continue;
    dec.regions[static_cast<std::size_t>(rt)].branches.push_back(static_cast<int>(e));
    dec.cut_branches.push_back(static_cast<int>(e));
    fictitious[static_cast<std::size_t>(rf)].insert(br.to);
    fictitious[static_cast<std::size_t>(rt)].insert(br.from);
    neighbors[static_cast<std::size_t>(rf)].insert(rt);
    neighbors[static_cast<std::size_t>(rt)].insert(rf);
    const auto key = std::minmax(rf, rt);
    auto [it, inserted] = pair_index.emplace(key, dec.boundaries.size());
    if (inserted) {
      Boundary b;
      b.first = key.first;
      b.second = key.second;
      dec.boundaries.push_back(b);
    }
    dec.boundaries[it->second].cut_branches.push_back(static_cast<int>(e));
  }
  for (int r = 0; r < regions; ++r) {
    auto& region = dec.regions[static_cast<std::size_t>(r)];
    region.fictitious_buses.assign(fictitious[static_cast<std::size_t>(r)].begin(), fictitious[static_cast<std::size_t>(r)].end());
    region.neighbors.assign(neighbors[static_cast<std::size_t>(r)].begin(), neighbors[static_cast<std::size_t>(r)].end());
  }

  // Boundary pairs in (first, second) order; within a pair, the voltages of
  // every boundary bus (once) followed by both end flows of every cut branch.
  std::sort(dec.boundaries.begin(), dec.boundaries.end(), [](const Boundary& a, const Boundary& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  for (auto& boundary : dec.boundaries) {
    std::set<int> buses_seen;
    for (int e : boundary.cut_branches) {
      const auto& br = n.branches[static_cast<std::size_t>(e)];
      for (int bus : {br.from, br.to}) {
        if (buses_seen.insert(bus).second) {
          boundary.variables.push_back({SharedQuantity::VoltageMagnitude, bus});
          boundary.variables.push_back({SharedQuantity::VoltageAngle, bus});
        }
      }
    }
    for (int e : boundary.cut_branches) {
      boundary.variables.push_back({SharedQuantity::ActiveFrom, e});
      boundary.variables.push_back({SharedQuantity::ReactiveFrom, e});
      boundary.variables.push_back({SharedQuantity::ActiveTo, e});
      boundary.variables.push_back({SharedQuantity::ReactiveTo, e});
    }
  }
  return dec;
}

// ---------------------------------------------------------------------------

LoadEnvelope LoadEnvelope::from_network(const Network& net, double r) {
  if (!(r >= 0.0 && r < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "load variation factor must lie in [0, 1)");
  }
  LoadEnvelope env;
  env.r = r;
  for (const auto& b : net.buses) {
    env.pd_nominal.push_back(b.pd);
    env.qd_nominal.push_back(b.qd);
  }
  return env;
}

LoadAssignment LoadAssignment::nominal(const Network& net) {
  LoadAssignment a;
  for (const auto& b : net.buses) {
    a.factor.push_back(1.0);
    a.pd.push_back(b.pd);
    a.qd.push_back(b.qd);
  }
  return a;
}

LoadAssignment sample_loads(const LoadEnvelope& env, std::uint64_t seed) {
  if (env.pd_nominal.size() != env.qd_nominal.size()) {
    throw Error(ErrorKind::DimensionMismatch, "nominal p and q loads differ in length");
  }
  LoadAssignment a;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(1.0 - env.r, 1.0 + env.r);
  for (std::size_t i = 0; i < env.pd_nominal.size(); ++i) {
    const double u = env.r > 0.0 ? dist(rng) : 1.0;
    a.factor.push_back(u);
    a.pd.push_back(u * env.pd_nominal[i]);
    a.qd.push_back(u * env.qd_nominal[i]);
  }
  return a;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dopf
