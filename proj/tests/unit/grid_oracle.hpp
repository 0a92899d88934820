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

// Power balance recomputed with complex arithmetic straight from the case
// data, independent of the library's flow coefficients.

#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "dopf/caseio.hpp"

namespace dopf::testing {

using cd = std::complex<double>;

struct BranchPower {
  cd from, to;  // pu
};

/// Complex power entering a branch at each end, for voltages in polar form.
inline BranchPower branch_power(const BranchRow& br, double v_from, double a_from, double v_to, double a_to) {
  const cd ys = 1.0 / cd(br.r, br.x);
  const cd charge(0.0, br.b / 2.0);
  const double ratio = br.tap == 0.0 ? 1.0 : br.tap;
  const cd tap = std::polar(ratio, br.shift * M_PI / 180.0);
  const cd vf = std::polar(v_from, a_from), vt = std::polar(v_to, a_to);
  const cd i_from = (ys + charge) / (ratio * ratio) * vf - ys / std::conj(tap) * vt;
  const cd i_to = -ys / tap * vf + (ys + charge) * vt;
  return {vf * std::conj(i_from), vt * std::conj(i_to)};
}

/// Largest active or reactive mismatch (pu) over all buses for bus
/// voltages, per-generator outputs (pu) and per-bus loads (pu).
inline double balance_mismatch(const RawCase& c, const std::vector<double>& v, const std::vector<double>& theta,
                               const std::vector<double>& pg, const std::vector<double>& qg,
                               const std::vector<double>& pd, const std::vector<double>& qd) {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < c.buses.size(); ++i) index[c.buses[i].id] = i;
  std::vector<cd> net(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const auto& b = c.buses[i];
    net[i] = -cd(pd[i], qd[i]) - cd(b.gs, -b.bs) / c.base_mva * v[i] * v[i];
  }
  for (std::size_t g = 0; g < c.generators.size(); ++g) net[index.at(c.generators[g].bus)] += cd(pg[g], qg[g]);
  for (const auto& br : c.branches) {
    const std::size_t f = index.at(br.from), t = index.at(br.to);
    const BranchPower s = branch_power(br, v[f], theta[f], v[t], theta[t]);
    net[f] -= s.from;
    net[t] -= s.to;
  }
  double worst = 0.0;
  for (const auto& s : net) worst = std::max({worst, std::abs(s.real()), std::abs(s.imag())});
  return worst;
}

}  // namespace dopf::testing
